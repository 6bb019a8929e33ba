//! Source, pilot, gain, and snapshot synthesis.
//!
//! Every random quantity is drawn from a caller-supplied RNG in a fixed,
//! documented order so seeded runs are reproducible to the byte:
//! QPSK symbols row by row (user-major, then time), gain magnitudes before
//! gain phases, noise column by column (time-major, then element, real part
//! before imaginary part).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use crate::array::{steering_vector, ArrayGeometry};
use crate::{c64, C64, Error, Result};

const FRAC: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Unit-power QPSK alphabet, Gray-indexed: bit 0 flips the real sign,
/// bit 1 the imaginary sign.
pub const QPSK_ALPHABET: [C64; 4] = [
    C64::new(FRAC, FRAC),
    C64::new(-FRAC, FRAC),
    C64::new(FRAC, -FRAC),
    C64::new(-FRAC, -FRAC),
];

/// One uniformly drawn QPSK symbol.
pub fn draw_qpsk<R: Rng>(rng: &mut R) -> C64 {
    QPSK_ALPHABET[rng.random_range(0..4usize)]
}

/// Makes one user's symbol stream a scaled copy of another's.
/// Indices are 0-based user indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceLink {
    pub target: usize,
    pub source: usize,
    pub coeff: C64,
}

fn validate_coherence(k: usize, links: &[CoherenceLink]) -> Result<()> {
    for link in links {
        if link.target >= k || link.source >= k {
            return Err(Error::Scenario(format!(
                "coherence link {} <- {} out of range for k = {k}",
                link.target, link.source
            )));
        }
        if link.target == link.source {
            return Err(Error::Scenario(format!(
                "coherence link targets itself (user {})",
                link.target
            )));
        }
    }
    for (i, a) in links.iter().enumerate() {
        for b in &links[i + 1..] {
            if a.target == b.target {
                return Err(Error::Scenario(format!(
                    "user {} is the target of two coherence links",
                    a.target
                )));
            }
        }
        // One level only: a chained copy would make coeff meaning recursive.
        if links.iter().any(|b| b.source == a.target) {
            return Err(Error::Scenario(format!(
                "user {} is both a coherence target and a source",
                a.target
            )));
        }
    }
    Ok(())
}

/// K x T QPSK symbol matrix. All rows are drawn independently first (so the
/// RNG consumption does not depend on the link set), then each link overwrites
/// its target row with `coeff * source` row.
pub fn gen_sources<R: Rng>(
    rng: &mut R,
    k: usize,
    t: usize,
    links: &[CoherenceLink],
) -> Result<DMatrix<C64>> {
    if k == 0 || t == 0 {
        return Err(Error::Dimension(format!("sources need k >= 1, t >= 1 (got {k} x {t})")));
    }
    validate_coherence(k, links)?;
    let mut s = DMatrix::zeros(k, t);
    for kk in 0..k {
        for tt in 0..t {
            s[(kk, tt)] = draw_qpsk(rng);
        }
    }
    for link in links {
        for tt in 0..t {
            s[(link.target, tt)] = link.coeff * s[(link.source, tt)];
        }
    }
    Ok(s)
}

/// Per-user complex path gains.
///
/// Powers are drawn `q ~ U(1, ratio_max)` then rescaled so the mean power is
/// exactly `noise_power * 10^(snr_db/10)`; `ratio_max = 1` gives equal powers.
/// Phases are uniform on `[0, 2pi)`. Gains are `sqrt(q) * exp(j*phase)`.
/// Draw order: all magnitudes, then all phases.
pub fn gen_gains<R: Rng>(
    rng: &mut R,
    k: usize,
    ratio_max: f64,
    snr_db: f64,
    noise_power: f64,
) -> Result<DVector<C64>> {
    if k == 0 {
        return Err(Error::Scenario("need at least one user".into()));
    }
    if !(ratio_max.is_finite() && ratio_max >= 1.0) {
        return Err(Error::Scenario(format!("gain ratio must be >= 1, got {ratio_max}")));
    }
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::Scenario(format!("noise power must be positive, got {noise_power}")));
    }
    let mut q: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..=ratio_max)).collect();
    let mean: f64 = q.iter().sum::<f64>() / k as f64;
    let target_mean = noise_power * 10f64.powf(snr_db / 10.0);
    for v in &mut q {
        *v *= target_mean / mean;
    }
    let phases: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    Ok(DVector::from_iterator(
        k,
        q.iter().zip(&phases).map(|(&qq, &ph)| c64(ph.cos(), ph.sin()) * qq.sqrt()),
    ))
}

/// M x T circular complex Gaussian noise with per-entry power `noise_power`
/// (variance `noise_power/2` per real dimension). Drawn time-major.
pub fn gen_noise<R: Rng>(rng: &mut R, m: usize, t: usize, noise_power: f64) -> DMatrix<C64> {
    let scale = (noise_power / 2.0).sqrt();
    let mut n = DMatrix::zeros(m, t);
    for tt in 0..t {
        for mm in 0..m {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            n[(mm, tt)] = c64(re * scale, im * scale);
        }
    }
    n
}

/// Noisy M x T snapshot block `Y = A(theta) diag(gains) S + N` observed on
/// the selected ports. Angles in radians.
pub fn synthesize_snapshots<R: Rng>(
    rng: &mut R,
    geom: &ArrayGeometry,
    doas_rad: &[f64],
    gains: &DVector<C64>,
    symbols: &DMatrix<C64>,
    noise_power: f64,
) -> Result<DMatrix<C64>> {
    let k = doas_rad.len();
    if gains.len() != k || symbols.nrows() != k {
        return Err(Error::Dimension(format!(
            "doas/gains/symbols disagree on k: {} vs {} vs {}",
            k,
            gains.len(),
            symbols.nrows()
        )));
    }
    let a = steering_matrix(geom.positions(), doas_rad);
    let mut y = &a * DMatrix::from_diagonal(gains) * symbols;
    y += gen_noise(rng, geom.m(), symbols.ncols(), noise_power);
    Ok(y)
}

/// Stacks steering vectors into an M x K matrix.
pub fn steering_matrix(positions: &[f64], doas_rad: &[f64]) -> DMatrix<C64> {
    let m = positions.len();
    let mut a = DMatrix::zeros(m, doas_rad.len());
    for (kk, &th) in doas_rad.iter().enumerate() {
        a.set_column(kk, &steering_vector(positions, th));
    }
    a
}

/// K x T_p pilot matrix with orthogonal unit-modulus rows:
/// `phi[k, t] = exp(-2pi*j*k*t/t_p)`. Rows satisfy `phi phi^H = t_p I`
/// whenever `k <= t_p`, which the constructor enforces.
pub fn gen_pilot_matrix(k: usize, t_p: usize) -> Result<DMatrix<C64>> {
    if k == 0 {
        return Err(Error::Pilot("need at least one pilot row".into()));
    }
    if t_p < k {
        return Err(Error::Pilot(format!(
            "pilot length {t_p} shorter than user count {k}; rows would not be orthogonal"
        )));
    }
    let mut phi = DMatrix::zeros(k, t_p);
    for kk in 0..k {
        for tt in 0..t_p {
            let ph = -std::f64::consts::TAU * (kk * tt) as f64 / t_p as f64;
            phi[(kk, tt)] = c64(ph.cos(), ph.sin());
        }
    }
    Ok(phi)
}

/// Exact array covariance `A Cs A^H + noise_power * I` for a given source
/// covariance, for tests and analytical studies.
pub fn exact_covariance(
    geom: &ArrayGeometry,
    doas_rad: &[f64],
    source_cov: &DMatrix<C64>,
    noise_power: f64,
) -> Result<DMatrix<C64>> {
    let k = doas_rad.len();
    if source_cov.nrows() != k || source_cov.ncols() != k {
        return Err(Error::Dimension(format!(
            "source covariance is {}x{}, expected {k}x{k}",
            source_cov.nrows(),
            source_cov.ncols()
        )));
    }
    let a = steering_matrix(geom.positions(), doas_rad);
    let mut r = &a * source_cov * a.adjoint();
    for i in 0..geom.m() {
        r[(i, i)] += c64(noise_power, 0.0);
    }
    Ok(r)
}

/// How a scenario places its sources.
#[derive(Debug, Clone, PartialEq)]
pub enum DoaSpec {
    /// Fixed nominal angles, each independently jittered by
    /// `U(-half_width, half_width)` degrees per trial.
    Perturbed { base_deg: Vec<f64>, half_width_deg: f64 },
    /// Uniform angles on a range, redrawn until every pair is at least
    /// `min_sep_deg` apart. Returned sorted ascending.
    RandomSeparated { range_deg: (f64, f64), min_sep_deg: f64 },
}

/// Source-side description of a Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub k: usize,
    pub doas: DoaSpec,
    pub coherence: Vec<CoherenceLink>,
    pub gain_ratio_max: f64,
    pub noise_power: f64,
}

/// Attempts before giving up on the separation constraint.
const SEPARATION_ATTEMPTS: usize = 10_000;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Scenario("k must be at least 1".into()));
        }
        match &self.doas {
            DoaSpec::Perturbed { base_deg, half_width_deg } => {
                if base_deg.len() != self.k {
                    return Err(Error::Scenario(format!(
                        "{} base angles for k = {}",
                        base_deg.len(),
                        self.k
                    )));
                }
                if !(half_width_deg.is_finite() && *half_width_deg >= 0.0) {
                    return Err(Error::Scenario("perturbation width must be >= 0".into()));
                }
            }
            DoaSpec::RandomSeparated { range_deg, min_sep_deg } => {
                if !(range_deg.0 < range_deg.1) {
                    return Err(Error::Scenario(format!(
                        "empty angle range [{}, {}]",
                        range_deg.0, range_deg.1
                    )));
                }
                if !(min_sep_deg.is_finite() && *min_sep_deg >= 0.0) {
                    return Err(Error::Scenario("min separation must be >= 0".into()));
                }
                // Necessary condition so rejection sampling can terminate.
                let span = range_deg.1 - range_deg.0;
                if *min_sep_deg * (self.k as f64 - 1.0) >= span {
                    return Err(Error::Scenario(format!(
                        "cannot fit {} sources {} deg apart in a {span} deg range",
                        self.k, min_sep_deg
                    )));
                }
            }
        }
        validate_coherence(self.k, &self.coherence)?;
        if !(self.gain_ratio_max.is_finite() && self.gain_ratio_max >= 1.0) {
            return Err(Error::Scenario("gain ratio must be >= 1".into()));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::Scenario("noise power must be positive".into()));
        }
        Ok(())
    }

    /// Draws this trial's true angles in degrees. Perturbed specs keep the
    /// base order; random specs return sorted angles.
    pub fn draw_doas_deg<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.doas {
            DoaSpec::Perturbed { base_deg, half_width_deg } => Ok(base_deg
                .iter()
                .map(|&b| {
                    if *half_width_deg > 0.0 {
                        b + rng.random_range(-half_width_deg..*half_width_deg)
                    } else {
                        b
                    }
                })
                .collect()),
            DoaSpec::RandomSeparated { range_deg, min_sep_deg } => {
                for _ in 0..SEPARATION_ATTEMPTS {
                    let mut draw: Vec<f64> =
                        (0..self.k).map(|_| rng.random_range(range_deg.0..range_deg.1)).collect();
                    draw.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    if draw.windows(2).all(|w| w[1] - w[0] >= *min_sep_deg) {
                        return Ok(draw);
                    }
                }
                Err(Error::Scenario(format!(
                    "separation constraint not met after {SEPARATION_ATTEMPTS} draws"
                )))
            }
        }
    }
}
