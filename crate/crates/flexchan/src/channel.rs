//! Path-gain calibration, full-aperture channel reconstruction, the
//! conventional per-subset pilot estimator, and the evaluation metrics.

use nalgebra::{DMatrix, DVector};

use crate::array::{steering_vector, ArrayGeometry};
use crate::signals::steering_matrix;
use crate::{c64, C64, Error, Result};

/// Condition-number cutoff for the calibration normal matrix.
const COND_LIMIT: f64 = 1e8;

/// Penalty (degrees) charged per true source that no estimate covers.
pub const MISS_PENALTY_DEG: f64 = 180.0;

/// Calibrated per-user gains. `gains[u]` is zero when no detected angle was
/// assigned to pilot row `u`; `doas_rad[u]` then holds 0.0 as a placeholder,
/// which reconstruction ignores because the zero gain blanks the column.
#[derive(Debug, Clone)]
pub struct GainCalibration {
    pub gains: Vec<C64>,
    pub doas_rad: Vec<f64>,
}

/// Best injective assignment of detected angles to pilot rows by despread
/// correlation: maximizes `sum |a(theta_d)^H b_u|^2` with `b_u` the u-th
/// despread column. Returns `assign[d] = u`.
fn assign_rows(score: &DMatrix<f64>) -> Vec<usize> {
    let d = score.nrows();
    let k = score.ncols();
    let mut best = f64::NEG_INFINITY;
    let mut best_assign = vec![0usize; d];
    let mut assign = vec![0usize; d];

    fn dfs(
        row: usize,
        used: &mut u32,
        total: f64,
        score: &DMatrix<f64>,
        assign: &mut Vec<usize>,
        best: &mut f64,
        best_assign: &mut Vec<usize>,
    ) {
        let (d, k) = score.shape();
        if row == d {
            if total > *best {
                *best = total;
                best_assign.clone_from(assign);
            }
            return;
        }
        for u in 0..k {
            if *used & (1 << u) == 0 {
                *used |= 1 << u;
                assign[row] = u;
                dfs(row + 1, used, total + score[(row, u)], score, assign, best, best_assign);
                *used &= !(1 << u);
            }
        }
    }

    let mut used = 0u32;
    dfs(0, &mut used, 0.0, score, &mut assign, &mut best, &mut best_assign);
    debug_assert!(d <= k);
    best_assign
}

/// Least-squares path gains from the pilot block.
///
/// Model: `Y_p = A(theta) diag(p) Phi + N`. The normal equations for p are
/// `G p = diag(A^H Y_p Phi^H)` with `G = (A^H A) .* (Phi Phi^H)^T`; with
/// orthogonal pilot rows G is diagonal and the solve decouples per user.
/// Detected angles (possibly fewer than K, in any order) are first assigned
/// to pilot rows by despread correlation; unassigned users get zero gain.
pub fn calibrate_gains(
    y_pilot: &DMatrix<C64>,
    doas_rad: &[f64],
    geom: &ArrayGeometry,
    pilots: &DMatrix<C64>,
) -> Result<GainCalibration> {
    let m = geom.m();
    let k = pilots.nrows();
    let t_p = pilots.ncols();
    let d = doas_rad.len();
    if y_pilot.nrows() != m {
        return Err(Error::Dimension(format!(
            "pilot block has {} rows, geometry selects {m} ports",
            y_pilot.nrows()
        )));
    }
    if y_pilot.ncols() != t_p {
        return Err(Error::Dimension(format!(
            "pilot block length {} vs pilot matrix length {t_p}",
            y_pilot.ncols()
        )));
    }
    if d == 0 {
        return Ok(GainCalibration { gains: vec![C64::default(); k], doas_rad: vec![0.0; k] });
    }
    if d > k {
        return Err(Error::Dimension(format!("{d} detected angles for {k} pilot rows")));
    }

    // Despread once; columns approximate gain-weighted steering vectors.
    let despread = y_pilot * pilots.adjoint() / c64(t_p as f64, 0.0);
    let a = steering_matrix(geom.positions(), doas_rad);
    let mut score = DMatrix::zeros(d, k);
    for dd in 0..d {
        for u in 0..k {
            score[(dd, u)] = a.column(dd).dotc(&despread.column(u)).norm_sqr();
        }
    }
    let assign = assign_rows(&score);

    // Joint LS restricted to the assigned pilot rows.
    let mut phi_sel = DMatrix::zeros(d, t_p);
    for (dd, &u) in assign.iter().enumerate() {
        phi_sel.set_row(dd, &pilots.row(u));
    }
    let aha = a.ad_mul(&a);
    let pph = &phi_sel * phi_sel.adjoint();
    let g = DMatrix::from_fn(d, d, |i, j| aha[(i, j)] * pph[(j, i)]);
    let rhs_full = a.adjoint() * y_pilot * phi_sel.adjoint();
    let rhs = DVector::from_fn(d, |i, _| rhs_full[(i, i)]);

    let svd = nalgebra::SVD::new(g, true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }
    let p = svd.solve(&rhs, 0.0).map_err(|e| Error::Dimension(e.to_string()))?;

    let mut gains = vec![C64::default(); k];
    let mut doas = vec![0.0f64; k];
    for (dd, &u) in assign.iter().enumerate() {
        gains[u] = p[dd];
        doas[u] = doas_rad[dd];
    }
    Ok(GainCalibration { gains, doas_rad: doas })
}

/// Channel estimate over the full aperture, one column per user.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// N x K full-port channel matrix.
    pub h: DMatrix<C64>,
}

/// Rebuilds the N-port channel `h_u = p_u a_N(theta_u)` from calibrated
/// angles and gains.
pub fn reconstruct_channel(
    doas_rad: &[f64],
    gains: &[C64],
    n_ports: usize,
    spacing: f64,
) -> Result<ChannelEstimate> {
    if doas_rad.len() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} angles vs {} gains",
            doas_rad.len(),
            gains.len()
        )));
    }
    let full = ArrayGeometry::full(n_ports, spacing)?;
    let mut h = DMatrix::zeros(n_ports, gains.len());
    for (u, (&th, &p)) in doas_rad.iter().zip(gains).enumerate() {
        if p != C64::default() {
            h.set_column(u, &(steering_vector(full.positions(), th) * p));
        }
    }
    Ok(ChannelEstimate { h })
}

/// Consecutive port subsets of size `m` tiling `1..=n_ports`; the last block
/// keeps the remainder.
pub fn port_subsets(n_ports: usize, m: usize) -> Vec<Vec<usize>> {
    (1..=n_ports).collect::<Vec<usize>>().chunks(m).map(|c| c.to_vec()).collect()
}

/// Conventional estimator: per-block pilot LS `H_b = Y_b Phi^H (Phi Phi^H)^-1`
/// with rows scattered back to each block's ports. Every block must observe
/// at least K pilot symbols.
pub fn conventional_ls(
    y_blocks: &[DMatrix<C64>],
    pilots_block: &DMatrix<C64>,
    subsets: &[Vec<usize>],
    n_ports: usize,
) -> Result<ChannelEstimate> {
    let k = pilots_block.nrows();
    let t_b = pilots_block.ncols();
    if y_blocks.len() != subsets.len() {
        return Err(Error::Dimension(format!(
            "{} snapshot blocks vs {} port subsets",
            y_blocks.len(),
            subsets.len()
        )));
    }
    if t_b < k {
        return Err(Error::Unidentifiable(format!(
            "per-block pilot length {t_b} cannot resolve {k} users"
        )));
    }
    let gram = pilots_block * pilots_block.adjoint();
    let inv = gram.clone().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;

    let mut h = DMatrix::zeros(n_ports, k);
    for (block, ports) in y_blocks.iter().zip(subsets) {
        if block.nrows() != ports.len() || block.ncols() != t_b {
            return Err(Error::Dimension(format!(
                "block is {}x{}, expected {}x{t_b}",
                block.nrows(),
                block.ncols(),
                ports.len()
            )));
        }
        let hb = block * pilots_block.adjoint() * &inv;
        for (row, &port) in ports.iter().enumerate() {
            if port == 0 || port > n_ports {
                return Err(Error::Dimension(format!("port index {port} out of range")));
            }
            h.set_row(port - 1, &hb.row(row));
        }
    }
    Ok(ChannelEstimate { h })
}

/// Normalized mean squared error `||H - Hhat||_F^2 / ||H||_F^2`.
pub fn nmse(h_true: &DMatrix<C64>, h_hat: &DMatrix<C64>) -> Result<f64> {
    if h_true.shape() != h_hat.shape() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            h_true.nrows(),
            h_true.ncols(),
            h_hat.nrows(),
            h_hat.ncols()
        )));
    }
    let denom = h_true.norm_squared();
    if denom == 0.0 {
        return Err(Error::Dimension("true channel is identically zero".into()));
    }
    Ok((h_true - h_hat).norm_squared() / denom)
}

/// Angle error: each true angle is matched to a distinct estimate (or charged
/// [`MISS_PENALTY_DEG`] when none is left); the assignment minimizing the sum
/// of squared errors is used and the result is `||errors||_2 / K`, degrees.
pub fn rmse_doa(est_deg: &[f64], true_deg: &[f64]) -> f64 {
    let k = true_deg.len();
    if k == 0 {
        return 0.0;
    }

    fn dfs(t_idx: usize, used: u32, est: &[f64], truth: &[f64]) -> f64 {
        if t_idx == truth.len() {
            return 0.0;
        }
        // Leave this true angle unmatched.
        let mut best = MISS_PENALTY_DEG * MISS_PENALTY_DEG + dfs(t_idx + 1, used, est, truth);
        for (e_idx, &e) in est.iter().enumerate() {
            if used & (1 << e_idx) == 0 {
                let diff = e - truth[t_idx];
                let cand = diff * diff + dfs(t_idx + 1, used | (1 << e_idx), est, truth);
                if cand < best {
                    best = cand;
                }
            }
        }
        best
    }

    let sum_sq = dfs(0, 0, est_deg, true_deg);
    sum_sq.sqrt() / k as f64
}

/// Closed-form error levels for the two pilot strategies at a given
/// operating point, plus their pilot-overhead ratio `N/K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalNmse {
    pub conventional: f64,
    pub sensing_assisted: f64,
    pub overhead_ratio: f64,
}

/// `conventional = N sigma^2 / (M T_p pbar)`, `sensing = K sigma^2 /
/// (M T_p pbar)`, `ratio = N / K`, with `pbar` the mean path power.
pub fn theoretical_nmse(
    n_ports: usize,
    m: usize,
    k: usize,
    t_p: usize,
    noise_power: f64,
    mean_power: f64,
) -> Result<TheoreticalNmse> {
    if n_ports == 0 || m == 0 || k == 0 || t_p == 0 {
        return Err(Error::Dimension("all dimensions must be positive".into()));
    }
    if !(noise_power > 0.0 && mean_power > 0.0) {
        return Err(Error::Dimension("powers must be positive".into()));
    }
    let base = noise_power / (m as f64 * t_p as f64 * mean_power);
    Ok(TheoreticalNmse {
        conventional: n_ports as f64 * base,
        sensing_assisted: k as f64 * base,
        overhead_ratio: n_ports as f64 / k as f64,
    })
}
