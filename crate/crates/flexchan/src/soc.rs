//! Second-order DOA estimation: sample covariance, noise subspace from the
//! Hermitian eigendecomposition, and the MUSIC projection objective with
//! analytic derivatives. Identifiable only while K < M.

use nalgebra::DMatrix;

use crate::array::{steering_set, ArrayGeometry};
use crate::subspace::{
    estimate_grid, estimate_newton, DoaEstimate, SearchConfig, SearchMethod, SubspaceBasis,
};
use crate::{c64, C64, Error, Result};

/// Sample covariance `Y Y^H / T`, re-symmetrized to kill roundoff skew.
pub fn sample_covariance(y: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (m, t) = y.shape();
    if m == 0 {
        return Err(Error::Dimension("empty snapshot matrix".into()));
    }
    if t < 2 {
        return Err(Error::Dimension(format!("need at least 2 snapshots, got {t}")));
    }
    let mut r = y * y.adjoint() / c64(t as f64, 0.0);
    let rh = r.adjoint();
    r = (r + rh) * c64(0.5, 0.0);
    Ok(r)
}

/// Noise subspace of a Hermitian covariance: eigenvectors of the `M - k`
/// smallest eigenvalues. Requires `1 <= k < M`.
pub fn soc_noise_subspace(r: &DMatrix<C64>, k: usize) -> Result<SubspaceBasis> {
    let m = r.nrows();
    if r.ncols() != m || m == 0 {
        return Err(Error::Dimension(format!("covariance must be square, got {}x{}", m, r.ncols())));
    }
    if k == 0 {
        return Err(Error::Unidentifiable("second-order subspace needs k >= 1".into()));
    }
    if k >= m {
        return Err(Error::Unidentifiable(format!(
            "second-order statistics support at most {} sources on {} chains (need k < M)",
            m - 1,
            m
        )));
    }
    let eig = nalgebra::SymmetricEigen::new(r.clone());
    // nalgebra does not promise an eigenvalue order; sort descending ourselves.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut noise = DMatrix::zeros(m, m - k);
    for (col, &i) in order[k..].iter().enumerate() {
        noise.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok(SubspaceBasis { noise, signal_dim: k, values })
}

/// MUSIC objective `J = ||Un^H a||^2` with analytic gradient and Hessian:
/// `J' = 2 Re{(Un^H a')^H (Un^H a)}`,
/// `J'' = 2 ||Un^H a'||^2 + 2 Re{(Un^H a)^H (Un^H a'')}`.
pub fn soc_objective(theta_rad: f64, basis: &SubspaceBasis, positions: &[f64]) -> (f64, f64, f64) {
    let s = steering_set(positions, theta_rad);
    let un_a = basis.noise.ad_mul(&s.a);
    let un_da = basis.noise.ad_mul(&s.da);
    let un_dda = basis.noise.ad_mul(&s.dda);
    let j = un_a.norm_squared();
    let grad = 2.0 * un_da.dotc(&un_a).re;
    let hess = 2.0 * (un_da.norm_squared() + un_a.dotc(&un_dda).re);
    (j, grad, hess)
}

/// DOA search against a precomputed covariance.
pub fn estimate_doa_soc_from_cov(
    r: &DMatrix<C64>,
    geom: &ArrayGeometry,
    k: usize,
    method: SearchMethod,
    cfg: &SearchConfig,
) -> Result<DoaEstimate> {
    if r.nrows() != geom.m() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{} but the geometry has {} selected ports",
            r.nrows(),
            r.ncols(),
            geom.m()
        )));
    }
    cfg.validate()?;
    let basis = soc_noise_subspace(r, k)?;
    let positions = geom.positions();
    Ok(match method {
        SearchMethod::Grid => {
            estimate_grid(&|t| soc_objective(t, &basis, positions).0, k, cfg)
        }
        SearchMethod::Newton => {
            estimate_newton(&|t| soc_objective(t, &basis, positions), k, cfg)
        }
    })
}

/// Blind DOA estimation from payload snapshots via the sample covariance.
pub fn estimate_doa_soc(
    y: &DMatrix<C64>,
    geom: &ArrayGeometry,
    k: usize,
    method: SearchMethod,
    cfg: &SearchConfig,
) -> Result<DoaEstimate> {
    let r = sample_covariance(y)?;
    estimate_doa_soc_from_cov(&r, geom, k, method, cfg)
}
