//! Fourth-order cumulant DOA estimation on the difference co-array.
//!
//! The M^2 x M^2 cumulant matrix behaves like a covariance taken on the
//! virtual array, which has up to M(M-1) degrees of freedom for a carefully
//! chosen port subset: more simultaneous sources than RF chains become
//! identifiable, and Gaussian noise of any power vanishes from the statistic.

use nalgebra::DMatrix;

use crate::array::{virtual_geometry, virtual_steering_set, ArrayGeometry, VirtualGeometry};
use crate::soc::sample_covariance;
use crate::subspace::{
    estimate_grid, estimate_newton, DoaEstimate, SearchConfig, SearchMethod, SubspaceBasis,
};
use crate::{c64, C64, Error, Result};

/// Shared three-term construction on any L x T sample block X:
/// with `z_t = x_t kron conj(x_t)`,
/// `C = mean(z z^H) - mean(z) mean(z)^H - R kron conj(R)`.
///
/// The last term subtracts the Gaussian moment pairing E[x x^H] kron
/// conj(E[x x^H]) entrywise: index ((m1,m2),(m3,m4)) of mean(z z^H) carries
/// E[x_{m1} x*_{m2} x*_{m3} x_{m4}], whose Gaussian part includes
/// R_{m1,m3} conj(R_{m2,m4}), the (m1,m3) kron conj((m2,m4)) layout.
fn fourth_order_core(x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (l, t) = x.shape();
    if l == 0 {
        return Err(Error::Dimension("empty sample block".into()));
    }
    if t < 2 {
        return Err(Error::Dimension(format!("need at least 2 snapshots, got {t}")));
    }
    let r = sample_covariance(x)?;
    let tl = l * l;
    let mut z = DMatrix::zeros(tl, t);
    for tt in 0..t {
        for m1 in 0..l {
            for m2 in 0..l {
                z[(m1 * l + m2, tt)] = x[(m1, tt)] * x[(m2, tt)].conj();
            }
        }
    }
    let inv_t = c64(1.0 / t as f64, 0.0);
    let s1 = &z * z.adjoint() * inv_t;
    let zbar = z.column_sum() * inv_t;
    let mut c = s1 - &zbar * zbar.adjoint() - r.kronecker(&r.conjugate());
    let ch = c.adjoint();
    c = (c + ch) * c64(0.5, 0.0);
    Ok(c)
}

/// Sample fourth-order cumulant matrix of the snapshots, M^2 x M^2.
pub fn foc_matrix(y: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    fourth_order_core(y)
}

/// Same statistic applied to source symbol streams (K^2 x K^2), used as an
/// oracle when checking the factorization `C4(A X) = (A kron conj(A)) C4(X)
/// (A kron conj(A))^H`, which holds exactly at any sample size.
pub fn source_cumulant_oracle(s: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    fourth_order_core(s)
}

/// Noise subspace of the cumulant matrix via SVD left vectors. Requires
/// `1 <= k <= dof` of the difference co-array.
pub fn foc_noise_subspace(
    c4: &DMatrix<C64>,
    k: usize,
    vg: &VirtualGeometry,
) -> Result<SubspaceBasis> {
    let l2 = c4.nrows();
    if c4.ncols() != l2 || l2 != vg.positions().len() {
        return Err(Error::Dimension(format!(
            "cumulant matrix is {}x{}, virtual array has {} elements",
            l2,
            c4.ncols(),
            vg.positions().len()
        )));
    }
    if k == 0 {
        return Err(Error::Unidentifiable("fourth-order subspace needs k >= 1".into()));
    }
    if k > vg.dof() {
        return Err(Error::Unidentifiable(format!(
            "fourth-order statistics on this subset support at most {} sources (co-array dof), requested {k}",
            vg.dof()
        )));
    }
    let svd = nalgebra::SVD::new(c4.clone(), true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..l2).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut noise = DMatrix::zeros(l2, l2 - k);
    for (col, &i) in order[k..].iter().enumerate() {
        noise.set_column(col, &u.column(i));
    }
    Ok(SubspaceBasis { noise, signal_dim: k, values })
}

/// MUSIC objective on the virtual array, with analytic derivatives.
pub fn foc_objective(theta_rad: f64, basis: &SubspaceBasis, vg: &VirtualGeometry) -> (f64, f64, f64) {
    let s = virtual_steering_set(vg, theta_rad);
    let un_b = basis.noise.ad_mul(&s.a);
    let un_db = basis.noise.ad_mul(&s.da);
    let un_ddb = basis.noise.ad_mul(&s.dda);
    let j = un_b.norm_squared();
    let grad = 2.0 * un_db.dotc(&un_b).re;
    let hess = 2.0 * (un_db.norm_squared() + un_b.dotc(&un_ddb).re);
    (j, grad, hess)
}

/// DOA search against a precomputed cumulant matrix.
pub fn estimate_doa_foc_from_cumulant(
    c4: &DMatrix<C64>,
    geom: &ArrayGeometry,
    k: usize,
    method: SearchMethod,
    cfg: &SearchConfig,
) -> Result<DoaEstimate> {
    cfg.validate()?;
    let vg = virtual_geometry(geom);
    let basis = foc_noise_subspace(c4, k, &vg)?;
    Ok(match method {
        SearchMethod::Grid => estimate_grid(&|t| foc_objective(t, &basis, &vg).0, k, cfg),
        SearchMethod::Newton => estimate_newton(&|t| foc_objective(t, &basis, &vg), k, cfg),
    })
}

/// Blind DOA estimation from payload snapshots via the cumulant matrix.
pub fn estimate_doa_foc(
    y: &DMatrix<C64>,
    geom: &ArrayGeometry,
    k: usize,
    method: SearchMethod,
    cfg: &SearchConfig,
) -> Result<DoaEstimate> {
    if y.nrows() != geom.m() {
        return Err(Error::Dimension(format!(
            "snapshots have {} rows but the geometry has {} selected ports",
            y.nrows(),
            geom.m()
        )));
    }
    let c4 = foc_matrix(y)?;
    estimate_doa_foc_from_cumulant(&c4, geom, k, method, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::steering_vector;
    use crate::signals::{gen_noise, gen_sources, steering_matrix, QPSK_ALPHABET};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mra() -> ArrayGeometry {
        ArrayGeometry::new(10, &[1, 2, 5, 7], 1.0).unwrap()
    }

    /// K x 4^K matrix whose columns enumerate every QPSK assignment, so the
    /// sample statistic over the columns equals the exact expectation.
    fn qpsk_ensemble(k: usize) -> DMatrix<C64> {
        let n = 4usize.pow(k as u32);
        DMatrix::from_fn(k, n, |kk, col| QPSK_ALPHABET[(col / 4usize.pow(kk as u32)) % 4])
    }

    #[test]
    fn single_sensor_qpsk_cumulant_is_minus_one() {
        // Unit-modulus input makes every term deterministic: 1 - 1 - 1 = -1,
        // exactly, at any sample count.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let y = gen_sources(&mut rng, 1, 50, &[]).unwrap();
        let c = foc_matrix(&y).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert!((c[(0, 0)] - c64(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn source_oracle_single_stream_is_minus_one() {
        let s = qpsk_ensemble(1);
        let c = source_cumulant_oracle(&s).unwrap();
        assert!((c[(0, 0)] - c64(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gaussian_noise_is_invisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let y = gen_noise(&mut rng, 4, 100_000, 1.7);
        let c = foc_matrix(&y).unwrap();
        let scale = c.norm() / 16.0;
        assert!(scale < 0.05, "residual cumulant mass {scale}");
    }

    #[test]
    fn independent_sources_have_diagonal_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = gen_sources(&mut rng, 2, 100_000, &[]).unwrap();
        let c = source_cumulant_oracle(&s).unwrap();
        // Self indices (0,0) -> 0 and (1,1) -> 3 carry the kurtosis -1.
        assert!((c[(0, 0)].re + 1.0).abs() < 0.05);
        assert!((c[(3, 3)].re + 1.0).abs() < 0.05);
        assert!(c[(0, 3)].norm() < 0.05);
        assert!(c[(1, 2)].norm() < 0.3, "cross moment decays with T");
    }

    #[test]
    fn cumulant_factors_through_the_mixing_matrix() {
        // Exact identity at finite T: C4(B S) = (B kron conj(B)) C4(S) (.)^H.
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let geom = mra();
        let doas = [-0.7f64, 0.1, 0.9];
        let gains = DVector::from_vec(vec![c64(1.2, 0.1), c64(0.4, -0.9), c64(0.8, 0.3)]);
        let s = gen_sources(&mut rng, 3, 200, &[]).unwrap();
        let b = steering_matrix(geom.positions(), &doas) * DMatrix::from_diagonal(&gains);
        let y = &b * &s;

        let lhs = foc_matrix(&y).unwrap();
        let cs = source_cumulant_oracle(&s).unwrap();
        let bb = b.kronecker(&b.conjugate());
        let rhs = &bb * cs * bb.adjoint();
        let rel = (lhs.clone() - rhs).norm() / lhs.norm();
        assert!(rel < 1e-10, "relative factorization error {rel}");
    }

    #[test]
    fn cumulant_ignores_snapshot_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let y = gen_noise(&mut rng, 3, 64, 1.0);
        let mut perm = y.clone();
        // Reverse columns.
        for tt in 0..64 {
            perm.set_column(tt, &y.column(63 - tt));
        }
        let c1 = foc_matrix(&y).unwrap();
        let c2 = foc_matrix(&perm).unwrap();
        let rel = (c1.clone() - c2).norm() / c1.norm();
        assert!(rel < 1e-12);
    }

    #[test]
    fn subspace_respects_coarray_dof() {
        let vg = virtual_geometry(&mra());
        let c4 = DMatrix::identity(16, 16);
        assert!(foc_noise_subspace(&c4, 12, &vg).is_ok());
        assert!(matches!(foc_noise_subspace(&c4, 13, &vg), Err(Error::Unidentifiable(_))));

        let ula = ArrayGeometry::new(10, &[1, 2, 3, 4], 1.0).unwrap();
        let vgu = virtual_geometry(&ula);
        assert!(foc_noise_subspace(&c4, 6, &vgu).is_ok());
        assert!(matches!(foc_noise_subspace(&c4, 7, &vgu), Err(Error::Unidentifiable(_))));
        assert!(matches!(foc_noise_subspace(&c4, 0, &vgu), Err(Error::Unidentifiable(_))));
    }

    /// Exact cumulant for independent unit-power QPSK sources with powers q:
    /// sum_k -q_k^2 b_k b_k^H over virtual steering vectors.
    fn exact_c4(geom: &ArrayGeometry, doas: &[f64], powers: &[f64]) -> DMatrix<C64> {
        let m = geom.m();
        let mut c = DMatrix::zeros(m * m, m * m);
        for (&th, &q) in doas.iter().zip(powers) {
            let a = steering_vector(geom.positions(), th);
            let b = a.kronecker(&a.conjugate());
            c -= b.clone() * b.adjoint() * c64(q * q, 0.0);
        }
        c
    }

    #[test]
    fn exact_cumulant_nulls_the_true_angles() {
        let geom = mra();
        let vg = virtual_geometry(&geom);
        let doas = [-50f64.to_radians(), 10f64.to_radians(), 35f64.to_radians()];
        let c4 = exact_c4(&geom, &doas, &[2.0, 1.0, 0.5]);
        let basis = foc_noise_subspace(&c4, 3, &vg).unwrap();
        for &th in &doas {
            let (j, _, _) = foc_objective(th, &basis, &vg);
            assert!(j < 1e-8, "J({th}) = {j}");
        }
        let (j_off, _, _) = foc_objective(-70f64.to_radians(), &basis, &vg);
        assert!(j_off > 1e-3);
    }

    #[test]
    fn objective_derivatives_match_finite_differences() {
        let geom = mra();
        let vg = virtual_geometry(&geom);
        let c4 = exact_c4(&geom, &[-0.4, 0.6], &[1.0, 1.0]);
        let basis = foc_noise_subspace(&c4, 2, &vg).unwrap();
        let h = 1e-6;
        for theta_deg in [-55.0, -9.0, 14.0, 49.0] {
            let t = f64::to_radians(theta_deg);
            let (j0, g, hes) = foc_objective(t, &basis, &vg);
            let (jp, _, _) = foc_objective(t + h, &basis, &vg);
            let (jm, _, _) = foc_objective(t - h, &basis, &vg);
            let fd_g = (jp - jm) / (2.0 * h);
            let fd_h = (jp + jm - 2.0 * j0) / (h * h);
            assert!((fd_g - g).abs() / g.abs().max(1.0) < 1e-5, "grad at {theta_deg}");
            assert!((fd_h - hes).abs() / hes.abs().max(1.0) < 1e-3, "hess at {theta_deg}");
        }
    }

    #[test]
    fn six_sources_on_four_chains_resolve_exactly() {
        // More sources than RF chains: impossible at second order, exact on
        // the hole-free 12-dof co-array under exact statistics.
        let geom = mra();
        let doas_deg = [-50.0, -30.0, -10.0, 10.0, 30.0, 50.0];
        let doas: Vec<f64> = doas_deg.iter().map(|d: &f64| d.to_radians()).collect();
        let c4 = exact_c4(&geom, &doas, &[1.0; 6]);
        let est = estimate_doa_foc_from_cumulant(
            &c4,
            &geom,
            6,
            SearchMethod::Newton,
            &SearchConfig::default(),
        )
        .unwrap();
        assert_eq!(est.misses, 0);
        for (got, want) in est.angles_deg().iter().zip(doas_deg) {
            assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
        }
    }

    #[test]
    fn single_source_snapshots_estimate_exactly() {
        // One constant-modulus source without noise gives a rank-one cumulant
        // with an exact null at the truth, at any T.
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let geom = mra();
        let s = gen_sources(&mut rng, 1, 64, &[]).unwrap();
        let a = steering_matrix(geom.positions(), &[17.25f64.to_radians()]);
        let y = &a * &s * c64(0.9, 0.4);
        let est =
            estimate_doa_foc(&y, &geom, 1, SearchMethod::Newton, &SearchConfig::default()).unwrap();
        assert_eq!(est.detected(), 1);
        assert!((est.angles_deg()[0] - 17.25).abs() < 1e-6);
    }

    #[test]
    fn grid_method_lands_within_one_dense_step() {
        let geom = mra();
        let doas = [-20.33f64.to_radians(), 24.18f64.to_radians()];
        let c4 = exact_c4(&geom, &doas, &[1.0, 1.0]);
        let est = estimate_doa_foc_from_cumulant(
            &c4,
            &geom,
            2,
            SearchMethod::Grid,
            &SearchConfig::default(),
        )
        .unwrap();
        for (got, want) in est.angles_deg().iter().zip([-20.33, 24.18]) {
            assert!((got - want).abs() <= 0.05 + 1e-9);
        }
    }

    #[test]
    fn coherent_pair_collapses_to_dips_near_truth() {
        // A fully coherent pair is one fourth-order direction: the exact
        // cumulant keeps local minima flanking both angles but no nulls,
        // while an independent third source still nulls exactly.
        let geom = mra();
        let vg = virtual_geometry(&geom);
        let th = [-45f64.to_radians(), 0.0, 40f64.to_radians()];
        // Exact statistics via ensemble enumeration: users (s1, 0.9 s1, s3).
        let base = qpsk_ensemble(2);
        let mut s = DMatrix::zeros(3, base.ncols());
        for col in 0..base.ncols() {
            s[(0, col)] = base[(0, col)];
            s[(1, col)] = base[(0, col)] * c64(0.9, 0.0);
            s[(2, col)] = base[(1, col)];
        }
        let a = steering_matrix(geom.positions(), &th);
        let y = &a * &s;
        let c4 = foc_matrix(&y).unwrap();
        let basis = foc_noise_subspace(&c4, 3, &vg).unwrap();

        let j1 = foc_objective(th[0], &basis, &vg).0;
        let j2 = foc_objective(th[1], &basis, &vg).0;
        let j3 = foc_objective(th[2], &basis, &vg).0;
        assert!(j3 < 1e-8, "independent source keeps an exact null: {j3}");
        assert!(j1 > 1e-3 && j2 > 1e-3, "coherent angles lose their nulls: {j1}, {j2}");

        // Dips survive within 2 degrees of each coherent angle.
        let cfg = SearchConfig::default();
        let est = estimate_doa_foc_from_cumulant(&c4, &geom, 3, SearchMethod::Newton, &cfg).unwrap();
        for want in [-45.0, 0.0] {
            let nearest = est
                .angles_deg()
                .iter()
                .map(|g| (g - want).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 2.0, "no dip within 2 deg of {want}");
        }
    }

    #[test]
    fn estimator_rejects_k_above_dof() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let geom = ArrayGeometry::new(10, &[1, 2, 3, 4], 1.0).unwrap();
        let y = gen_noise(&mut rng, 4, 32, 1.0);
        let err = estimate_doa_foc(&y, &geom, 7, SearchMethod::Grid, &SearchConfig::default());
        assert!(matches!(err, Err(Error::Unidentifiable(_))));
    }
}
