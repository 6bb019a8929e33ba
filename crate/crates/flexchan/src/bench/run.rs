//! Deterministic Monte Carlo engine and CSV reporting.
//!
//! Every (snr, trial) cell owns an independent ChaCha stream derived from the
//! master seed, so results do not depend on scheduling: trials can run on any
//! number of threads and still produce byte-identical CSV. All estimators
//! inside a trial share the same realization (same angles, gains, symbols,
//! noise), which makes their rows directly comparable.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{BenchConfig, Estimator};
use crate::array::ArrayGeometry;
use crate::channel::{
    calibrate_gains, conventional_ls, nmse, port_subsets, reconstruct_channel, rmse_doa,
    theoretical_nmse,
};
use crate::signals::{
    gen_gains, gen_noise, gen_pilot_matrix, gen_sources, steering_matrix, synthesize_snapshots,
};
use crate::soc::estimate_doa_soc;
use crate::foc::estimate_doa_foc;
use crate::subspace::{DoaEstimate, SearchMethod};
use crate::{C64, Result};

/// One aggregated CSV row: an estimator at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub estimator: &'static str,
    pub snr_db: f64,
    /// Mean assignment RMSE over trials, degrees. NaN for estimators that do
    /// not produce angles.
    pub rmse_deg: f64,
    /// Mean reconstruction NMSE over trials.
    pub nmse: f64,
    /// Undetected sources over all trials, as a fraction of K * trials.
    pub miss_rate: f64,
    /// Mean accepted Newton steps per detected source (0 for grid searches).
    pub iters: f64,
    /// Mean wall-clock per trial, ms. Exactly 0 unless `timing` is enabled.
    pub runtime_ms: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Theory curve row emitted by the `theory` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub scenario: String,
    pub snr_db: f64,
    pub conventional: f64,
    pub sensing_assisted: f64,
    pub overhead_ratio: f64,
}

struct TrialOut {
    rmse_deg: f64,
    nmse: f64,
    misses: usize,
    iters: f64,
    runtime_ms: f64,
}

fn mean_iters(est: &DoaEstimate) -> f64 {
    if est.iterations.is_empty() {
        0.0
    } else {
        est.iterations.iter().sum::<usize>() as f64 / est.iterations.len() as f64
    }
}

/// Per-realization context shared by all estimators of one trial.
struct TrialData<'a> {
    cfg: &'a BenchConfig,
    doas_deg: Vec<f64>,
    doas_rad: Vec<f64>,
    y: DMatrix<C64>,
    y_pilot: DMatrix<C64>,
    conv_blocks: Option<Vec<DMatrix<C64>>>,
    h_true: DMatrix<C64>,
}

/// Runs the DOA -> calibration -> reconstruction pipeline and scores it.
fn doa_pipeline(
    data: &TrialData,
    est: DoaEstimate,
    pilots: &DMatrix<C64>,
) -> Result<(f64, f64, usize, f64)> {
    let rmse = rmse_doa(&est.angles_deg(), &data.doas_deg);
    let cal = calibrate_gains(&data.y_pilot, &est.angles_rad, &data.cfg.geometry, pilots)?;
    let rec = reconstruct_channel(
        &cal.doas_rad,
        &cal.gains,
        data.cfg.geometry.n_ports(),
        data.cfg.geometry.spacing(),
    )?;
    let e = nmse(&data.h_true, &rec.h)?;
    Ok((rmse, e, est.misses, mean_iters(&est)))
}

fn run_trial(
    cfg: &BenchConfig,
    snr_idx: usize,
    trial: usize,
    pilots: &DMatrix<C64>,
    conv: Option<(&DMatrix<C64>, &[Vec<usize>])>,
) -> Result<Vec<TrialOut>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((snr_idx as u64) << 32) | trial as u64);
    let snr_db = cfg.snr_db[snr_idx];
    let sc = &cfg.scenario;
    let geom = &cfg.geometry;
    let sigma2 = sc.noise_power;

    // Fixed draw order: angles, gains, payload symbols, payload noise,
    // pilot noise, conventional block noise.
    let doas_deg = sc.draw_doas_deg(&mut rng)?;
    let doas_rad: Vec<f64> = doas_deg.iter().map(|d| d.to_radians()).collect();
    let gains = gen_gains(&mut rng, sc.k, sc.gain_ratio_max, snr_db, sigma2)?;
    let symbols = gen_sources(&mut rng, sc.k, cfg.snapshots, &sc.coherence)?;
    let y = synthesize_snapshots(&mut rng, geom, &doas_rad, &gains, &symbols, sigma2)?;

    let a_sel = steering_matrix(geom.positions(), &doas_rad);
    let gain_diag = DMatrix::from_diagonal(&gains);
    let y_pilot =
        &a_sel * &gain_diag * pilots + gen_noise(&mut rng, geom.m(), cfg.pilot_len, sigma2);

    let a_full =
        steering_matrix(ArrayGeometry::full(geom.n_ports(), geom.spacing())?.positions(), &doas_rad);
    let h_true = &a_full * &gain_diag;

    let conv_blocks = match conv {
        Some((pilots_block, subsets)) => {
            let t_b = pilots_block.ncols();
            let blocks = subsets
                .iter()
                .map(|ports| {
                    let rows: Vec<usize> = ports.iter().map(|&p| p - 1).collect();
                    let a_block = a_full.select_rows(rows.iter());
                    &a_block * &gain_diag * pilots_block
                        + gen_noise(&mut rng, ports.len(), t_b, sigma2)
                })
                .collect();
            Some(blocks)
        }
        None => None,
    };

    let data = TrialData { cfg, doas_deg, doas_rad, y, y_pilot, conv_blocks, h_true };

    let mut outs = Vec::with_capacity(cfg.estimators.len());
    for e in &cfg.estimators {
        let t0 = cfg.timing.then(Instant::now);
        let (rmse_deg, nm, misses, iters) = match e {
            Estimator::SocMusic | Estimator::SocNewton => {
                let method = if *e == Estimator::SocMusic {
                    SearchMethod::Grid
                } else {
                    SearchMethod::Newton
                };
                let est = estimate_doa_soc(&data.y, geom, sc.k, method, &cfg.search)?;
                doa_pipeline(&data, est, pilots)?
            }
            Estimator::FocMusic | Estimator::FocNewton => {
                let method = if *e == Estimator::FocMusic {
                    SearchMethod::Grid
                } else {
                    SearchMethod::Newton
                };
                let est = estimate_doa_foc(&data.y, geom, sc.k, method, &cfg.search)?;
                doa_pipeline(&data, est, pilots)?
            }
            Estimator::SensingAssistedTrue => {
                let cal = calibrate_gains(&data.y_pilot, &data.doas_rad, geom, pilots)?;
                let rec = reconstruct_channel(
                    &cal.doas_rad,
                    &cal.gains,
                    geom.n_ports(),
                    geom.spacing(),
                )?;
                (0.0, nmse(&data.h_true, &rec.h)?, 0, 0.0)
            }
            Estimator::ConventionalLs => {
                let (pilots_block, subsets) = conv.expect("validated before dispatch");
                let blocks = data.conv_blocks.as_ref().expect("synthesized with the trial");
                let rec = conventional_ls(blocks, pilots_block, subsets, geom.n_ports())?;
                (f64::NAN, nmse(&data.h_true, &rec.h)?, 0, 0.0)
            }
        };
        let runtime_ms = t0.map(|t| t.elapsed().as_secs_f64() * 1e3).unwrap_or(0.0);
        outs.push(TrialOut { rmse_deg, nmse: nm, misses, iters, runtime_ms });
    }
    Ok(outs)
}

/// Runs the full sweep. Returns one row per (estimator, snr), sorted by
/// estimator tag then SNR.
pub fn run_scenario(cfg: &BenchConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let k = cfg.scenario.k;
    let pilots = gen_pilot_matrix(k, cfg.pilot_len)?;
    let conv_ctx = if cfg.estimators.contains(&Estimator::ConventionalLs) {
        let t_b = cfg.conventional_block_len()?;
        let subsets = port_subsets(cfg.geometry.n_ports(), cfg.geometry.m());
        Some((gen_pilot_matrix(k, t_b)?, subsets))
    } else {
        None
    };
    let conv = conv_ctx.as_ref().map(|(p, s)| (p, s.as_slice()));

    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|si| (0..cfg.trials).map(move |tr| (si, tr)))
        .collect();
    let outs: Vec<Vec<TrialOut>> = jobs
        .into_par_iter()
        .map(|(si, tr)| run_trial(cfg, si, tr, &pilots, conv))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(cfg.estimators.len() * cfg.snr_db.len());
    for (ei, e) in cfg.estimators.iter().enumerate() {
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            let mut rmse = 0.0;
            let mut nm = 0.0;
            let mut misses = 0usize;
            let mut iters = 0.0;
            let mut runtime = 0.0;
            for tr in 0..cfg.trials {
                let out = &outs[si * cfg.trials + tr][ei];
                rmse += out.rmse_deg;
                nm += out.nmse;
                misses += out.misses;
                iters += out.iters;
                runtime += out.runtime_ms;
            }
            let nt = cfg.trials as f64;
            rows.push(ResultRow {
                scenario: cfg.name.clone(),
                estimator: e.tag(),
                snr_db: snr,
                rmse_deg: rmse / nt,
                nmse: nm / nt,
                miss_rate: misses as f64 / (k as f64 * nt),
                iters: iters / nt,
                runtime_ms: runtime / nt,
                trials: cfg.trials,
                seed: cfg.seed,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.estimator.cmp(b.estimator).then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
    });
    Ok(rows)
}

/// Closed-form curves for the config's operating point across its SNR sweep.
/// The mean path power is `noise_power * 10^(snr/10)` by the gain contract,
/// so the noise power cancels out of the predictions.
pub fn theory_rows(cfg: &BenchConfig) -> Result<Vec<TheoryRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.snr_db.len());
    for &snr in &cfg.snr_db {
        let mean_power = cfg.scenario.noise_power * 10f64.powf(snr / 10.0);
        let t = theoretical_nmse(
            cfg.geometry.n_ports(),
            cfg.geometry.m(),
            cfg.scenario.k,
            cfg.pilot_len,
            cfg.scenario.noise_power,
            mean_power,
        )?;
        rows.push(TheoryRow {
            scenario: cfg.name.clone(),
            snr_db: snr,
            conventional: t.conventional,
            sensing_assisted: t.sensing_assisted,
            overhead_ratio: t.overhead_ratio,
        });
    }
    Ok(rows)
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.9e}")
    }
}

pub const CSV_HEADER: &str =
    "scenario,estimator,snr_db,rmse_deg,nmse,miss_rate,iters,runtime_ms,trials,seed";

pub fn write_csv<W: Write>(rows: &[ResultRow], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.estimator,
            fmt(r.snr_db),
            fmt(r.rmse_deg),
            fmt(r.nmse),
            fmt(r.miss_rate),
            fmt(r.iters),
            fmt(r.runtime_ms),
            r.trials,
            r.seed
        )?;
    }
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

pub const THEORY_CSV_HEADER: &str =
    "scenario,snr_db,nmse_conventional,nmse_sensing_assisted,overhead_ratio";

pub fn write_theory_csv<W: Write>(rows: &[TheoryRow], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{THEORY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.scenario,
            fmt(r.snr_db),
            fmt(r.conventional),
            fmt(r.sensing_assisted),
            fmt(r.overhead_ratio)
        )?;
    }
    Ok(())
}

pub fn theory_csv_string(rows: &[TheoryRow]) -> String {
    let mut buf = Vec::new();
    write_theory_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}
