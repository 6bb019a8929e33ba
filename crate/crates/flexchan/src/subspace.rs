//! Search machinery shared by the second- and fourth-order estimators:
//! noise-subspace container, coarse grid scans, and damped Newton refinement
//! of the projection objective.

use nalgebra::DMatrix;

use crate::{C64, Error, Result};

/// Orthonormal noise-subspace basis plus the spectrum it came from.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    /// L x (L - signal_dim), orthonormal columns spanning the noise subspace.
    pub noise: DMatrix<C64>,
    /// Number of columns attributed to signals.
    pub signal_dim: usize,
    /// Full eigen- or singular-value spectrum, descending.
    pub values: Vec<f64>,
}

impl SubspaceBasis {
    /// Ambient dimension L (physical M, or M^2 for the virtual array).
    pub fn ambient_dim(&self) -> usize {
        self.noise.nrows()
    }
}

/// Whether a search stops at the dense grid or refines with Newton steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    Grid,
    Newton,
}

/// Angle-domain search parameters. Defaults: scan [-90, 90] degrees, 0.1
/// degree dense grid, 0.5 degree coarse grid, up to 200 Newton iterations,
/// stop when a step falls below 1e-10 radians, trust radius one coarse step.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub range_deg: (f64, f64),
    pub dense_step_deg: f64,
    pub coarse_step_deg: f64,
    pub max_newton_iters: usize,
    pub newton_tol_rad: f64,
    /// None means one coarse step, in radians.
    pub trust_radius_rad: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            range_deg: (-90.0, 90.0),
            dense_step_deg: 0.1,
            coarse_step_deg: 0.5,
            max_newton_iters: 200,
            newton_tol_rad: 1e-10,
            trust_radius_rad: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range_deg;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("empty search range [{lo}, {hi}]")));
        }
        if !(self.dense_step_deg > 0.0 && self.coarse_step_deg > 0.0) {
            return Err(Error::Config("grid steps must be positive".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::Config("need at least one Newton iteration".into()));
        }
        if !(self.newton_tol_rad > 0.0) {
            return Err(Error::Config("Newton tolerance must be positive".into()));
        }
        if let Some(tr) = self.trust_radius_rad {
            if !(tr > 0.0) {
                return Err(Error::Config("trust radius must be positive".into()));
            }
        }
        Ok(())
    }

    /// Inclusive grid over the range with the given step, in degrees.
    pub fn grid_deg(&self, step_deg: f64) -> Vec<f64> {
        let (lo, hi) = self.range_deg;
        let n = ((hi - lo) / step_deg).round() as usize;
        let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step_deg).collect();
        // Rounding can push the formal endpoint past hi; clamp keeps the
        // contract that every grid point is inside the range.
        if let Some(last) = g.last_mut() {
            if *last > hi {
                *last = hi;
            }
        }
        g
    }

    pub fn trust_radius(&self) -> f64 {
        self.trust_radius_rad.unwrap_or(self.coarse_step_deg.to_radians())
    }
}

/// Estimated angles (radians, ascending) plus bookkeeping: how many of the
/// requested sources were not found, and accepted Newton steps per angle
/// (zeros for grid searches).
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    pub angles_rad: Vec<f64>,
    pub misses: usize,
    pub iterations: Vec<usize>,
}

impl DoaEstimate {
    pub fn detected(&self) -> usize {
        self.angles_rad.len()
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        self.angles_rad.iter().map(|a| a.to_degrees()).collect()
    }
}

/// Indices of up to `k` strict interior local minima of `values`, ordered by
/// ascending value with ties broken toward the lower index. Plateaus are not
/// minima; endpoints never qualify.
pub fn coarse_scan(values: &[f64], k: usize) -> Vec<usize> {
    let mut minima: Vec<usize> = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        if values[i] < values[i - 1] && values[i] < values[i + 1] {
            minima.push(i);
        }
    }
    minima.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    minima.truncate(k);
    minima
}

/// Result of one Newton descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub theta_rad: f64,
    /// Accepted steps. Zero means the start point was already stationary or
    /// had non-positive curvature.
    pub iterations: usize,
}

/// Damped Newton descent on a scalar objective with analytic gradient and
/// Hessian. Steps are clamped to `trust_radius`; descent stops when the
/// clamped step magnitude drops below `tol_rad`, when curvature stops being
/// positive (trust the last point rather than jump to a maximum), or after
/// `max_iters` accepted steps. The iterate is clamped to `range_rad`.
pub fn newton_refine(
    obj: &dyn Fn(f64) -> (f64, f64, f64),
    theta0: f64,
    range_rad: (f64, f64),
    trust_radius: f64,
    max_iters: usize,
    tol_rad: f64,
) -> NewtonOutcome {
    let mut theta = theta0;
    let mut iters = 0;
    while iters < max_iters {
        let (_, grad, hess) = obj(theta);
        if hess <= 0.0 {
            break;
        }
        let mut step = -grad / hess;
        if step.abs() > trust_radius {
            step = trust_radius * step.signum();
        }
        if step.abs() < tol_rad {
            break;
        }
        theta = (theta + step).clamp(range_rad.0, range_rad.1);
        iters += 1;
    }
    NewtonOutcome { theta_rad: theta, iterations: iters }
}

/// Angles closer than this (radians) are treated as one converged minimum.
const DEDUPE_TOL_RAD: f64 = 1e-9;

/// Dense-grid search: evaluate the objective on the dense grid, keep the `k`
/// best strict local minima.
pub(crate) fn estimate_grid(obj: &dyn Fn(f64) -> f64, k: usize, cfg: &SearchConfig) -> DoaEstimate {
    let grid: Vec<f64> = cfg.grid_deg(cfg.dense_step_deg).iter().map(|d| d.to_radians()).collect();
    let values: Vec<f64> = grid.iter().map(|&t| obj(t)).collect();
    let idx = coarse_scan(&values, k);
    let mut angles: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let found = angles.len();
    DoaEstimate { angles_rad: angles, misses: k - found, iterations: vec![0; found] }
}

/// Coarse scan plus per-candidate Newton refinement. Refined angles that
/// collapse onto each other count as misses.
pub(crate) fn estimate_newton(
    obj: &dyn Fn(f64) -> (f64, f64, f64),
    k: usize,
    cfg: &SearchConfig,
) -> DoaEstimate {
    let grid: Vec<f64> = cfg.grid_deg(cfg.coarse_step_deg).iter().map(|d| d.to_radians()).collect();
    let values: Vec<f64> = grid.iter().map(|&t| obj(t).0).collect();
    let range_rad = (cfg.range_deg.0.to_radians(), cfg.range_deg.1.to_radians());
    let trust = cfg.trust_radius();

    let mut refined: Vec<(f64, usize)> = coarse_scan(&values, k)
        .into_iter()
        .map(|i| {
            let out =
                newton_refine(obj, grid[i], range_rad, trust, cfg.max_newton_iters, cfg.newton_tol_rad);
            (out.theta_rad, out.iterations)
        })
        .collect();
    refined.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    refined.dedup_by(|a, b| (a.0 - b.0).abs() <= DEDUPE_TOL_RAD);

    let angles: Vec<f64> = refined.iter().map(|r| r.0).collect();
    let iterations: Vec<usize> = refined.iter().map(|r| r.1).collect();
    DoaEstimate { misses: k - angles.len(), angles_rad: angles, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_scan_orders_minima_by_depth() {
        // Interior minima at indices 3 (value 1) and 1 (value 3).
        assert_eq!(coarse_scan(&[5.0, 3.0, 4.0, 1.0, 2.0], 2), vec![3, 1]);
        assert_eq!(coarse_scan(&[5.0, 3.0, 4.0, 1.0, 2.0], 1), vec![3]);
        assert_eq!(coarse_scan(&[5.0, 3.0, 4.0, 1.0, 2.0], 5), vec![3, 1]);
    }

    #[test]
    fn coarse_scan_ignores_endpoints_and_plateaus() {
        // Monotone: no interior minimum.
        assert!(coarse_scan(&[1.0, 2.0, 3.0, 4.0], 2).is_empty());
        // Endpoint is the smallest value but never a candidate.
        assert_eq!(coarse_scan(&[0.0, 2.0, 1.0, 3.0], 2), vec![2]);
        // Flat bottom is not strict.
        assert!(coarse_scan(&[3.0, 1.0, 1.0, 3.0], 2).is_empty());
    }

    #[test]
    fn coarse_scan_tie_prefers_lower_index() {
        let v = [5.0, 1.0, 5.0, 1.0, 5.0];
        assert_eq!(coarse_scan(&v, 1), vec![1]);
    }

    #[test]
    fn newton_solves_a_quadratic_in_one_step() {
        let obj = |t: f64| ((t - 0.3) * (t - 0.3), 2.0 * (t - 0.3), 2.0);
        let out = newton_refine(&obj, 1.0, (-2.0, 2.0), 10.0, 200, 1e-10);
        assert!((out.theta_rad - 0.3).abs() < 1e-12);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn newton_respects_the_trust_radius() {
        let obj = |t: f64| (t * t, 2.0 * t, 2.0);
        // Raw step from 1.0 is -1.0; clamped to 0.1 it takes 10 steps.
        let out = newton_refine(&obj, 1.0, (-2.0, 2.0), 0.1, 200, 1e-10);
        assert!(out.theta_rad.abs() < 1e-9);
        assert_eq!(out.iterations, 10);
    }

    #[test]
    fn newton_stops_on_nonpositive_curvature() {
        let obj = |t: f64| (-t * t, -2.0 * t, -2.0);
        let out = newton_refine(&obj, 0.7, (-2.0, 2.0), 10.0, 200, 1e-10);
        assert_eq!(out.theta_rad, 0.7);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn newton_hits_the_iteration_cap_with_zero_tolerance() {
        let obj = |t: f64| ((t - 0.3) * (t - 0.3), 2.0 * (t - 0.3), 2.0);
        // tol = 0 means the zero step after convergence still "passes" the
        // size test, so the loop only ends at the cap.
        let out = newton_refine(&obj, 1.0, (-2.0, 2.0), 10.0, 37, 0.0);
        assert_eq!(out.iterations, 37);
        assert!((out.theta_rad - 0.3).abs() < 1e-12);
    }

    #[test]
    fn newton_stays_inside_the_range() {
        let obj = |t: f64| ((t - 5.0) * (t - 5.0), 2.0 * (t - 5.0), 2.0);
        let out = newton_refine(&obj, 0.9, (-1.0, 1.0), 10.0, 200, 1e-10);
        assert!(out.theta_rad <= 1.0);
    }

    #[test]
    fn grid_helper_covers_the_range_inclusively() {
        let cfg = SearchConfig::default();
        let g = cfg.grid_deg(0.1);
        assert_eq!(g.len(), 1801);
        assert!((g[0] + 90.0).abs() < 1e-12);
        assert!((g[1800] - 90.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let cfg = SearchConfig { range_deg: (30.0, 30.0), ..SearchConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SearchConfig { dense_step_deg: 0.0, ..SearchConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SearchConfig { max_newton_iters: 0, ..SearchConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
