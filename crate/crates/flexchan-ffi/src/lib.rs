//! C ABI over the core pipeline: opaque geometry handles, status codes, and
//! flat-buffer entry points for DOA estimation and the closed-form error
//! levels. The header is generated into `include/flexchan.h` at build time.
//!
//! Conventions: complex samples cross the boundary as interleaved
//! `[re, im]` doubles; the snapshot matrix is snapshot-major (sample
//! `(element m, snapshot t)` lives at pair index `t * m_count + m`); angles
//! are degrees. Every fallible call returns a [`FlexchanStatus`] and writes
//! through out-pointers only on success.

use std::ffi::{c_char, c_uint};

use flexchan::array::{virtual_geometry, ArrayGeometry};
use flexchan::channel::theoretical_nmse;
use flexchan::subspace::{SearchConfig, SearchMethod};
use flexchan::{c64, Error};
use nalgebra::DMatrix;

/// Result of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexchanStatus {
    /// Success.
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// Arguments violate a documented contract (geometry, dimensions,
    /// configuration).
    InvalidArgument = 2,
    /// Source count exceeds what the statistic can identify.
    Unidentifiable = 3,
    /// A numerical solve failed or was too ill-conditioned to trust.
    NumericalFailure = 4,
}

fn status_of(e: &Error) -> FlexchanStatus {
    match e {
        Error::Unidentifiable(_) => FlexchanStatus::Unidentifiable,
        Error::IllConditioned { .. } => FlexchanStatus::NumericalFailure,
        _ => FlexchanStatus::InvalidArgument,
    }
}

/// Opaque array geometry handle. Create with `flexchan_geometry_new`, release
/// with `flexchan_geometry_free`.
pub struct FlexchanGeometry {
    inner: ArrayGeometry,
}

/// Builds a geometry from 1-based port indices on a uniform grid.
///
/// # Safety
/// `selected` must point to `selected_len` readable `usize` values and `out`
/// must be a valid pointer; the returned handle must be released with
/// `flexchan_geometry_free` exactly once.
#[no_mangle]
pub unsafe extern "C" fn flexchan_geometry_new(
    n_ports: usize,
    selected: *const usize,
    selected_len: usize,
    spacing: f64,
    out: *mut *mut FlexchanGeometry,
) -> FlexchanStatus {
    if selected.is_null() || out.is_null() {
        return FlexchanStatus::NullArgument;
    }
    let sel = std::slice::from_raw_parts(selected, selected_len);
    match ArrayGeometry::new(n_ports, sel, spacing) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(FlexchanGeometry { inner }));
            FlexchanStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a geometry handle. Null is a no-op.
///
/// # Safety
/// `geom` must be a handle from `flexchan_geometry_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flexchan_geometry_free(geom: *mut FlexchanGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Number of selected ports (RF chains).
///
/// # Safety
/// `geom` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn flexchan_geometry_num_selected(
    geom: *const FlexchanGeometry,
    out: *mut usize,
) -> FlexchanStatus {
    if geom.is_null() || out.is_null() {
        return FlexchanStatus::NullArgument;
    }
    *out = (*geom).inner.m();
    FlexchanStatus::Ok
}

/// Difference co-array degrees of freedom: the maximum source count the
/// fourth-order estimator can identify on this subset.
///
/// # Safety
/// `geom` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn flexchan_geometry_coarray_dof(
    geom: *const FlexchanGeometry,
    out: *mut usize,
) -> FlexchanStatus {
    if geom.is_null() || out.is_null() {
        return FlexchanStatus::NullArgument;
    }
    *out = virtual_geometry(&(*geom).inner).dof();
    FlexchanStatus::Ok
}

/// Statistic order selector for `flexchan_estimate_doa`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexchanOrder {
    /// Sample-covariance subspace (requires k < M).
    Second = 2,
    /// Fourth-order cumulant on the difference co-array (requires k <= dof).
    Fourth = 4,
}

/// Blind DOA estimation from payload snapshots.
///
/// `data` holds `snapshots * m * 2` doubles (interleaved re/im,
/// snapshot-major). Up to `k` angles (degrees, ascending) are written to
/// `out_angles_deg`, which must have capacity `k`; `out_detected` receives
/// how many were found. `use_newton != 0` refines the dense-grid scan with
/// Newton steps on the subspace objective.
///
/// # Safety
/// All pointers must be valid for the documented extents.
#[no_mangle]
pub unsafe extern "C" fn flexchan_estimate_doa(
    geom: *const FlexchanGeometry,
    data: *const f64,
    snapshots: usize,
    k: usize,
    order: FlexchanOrder,
    use_newton: c_uint,
    out_angles_deg: *mut f64,
    out_detected: *mut usize,
) -> FlexchanStatus {
    if geom.is_null() || data.is_null() || out_angles_deg.is_null() || out_detected.is_null() {
        return FlexchanStatus::NullArgument;
    }
    let g = &(*geom).inner;
    let m = g.m();
    let Some(n_doubles) = snapshots.checked_mul(m).and_then(|v| v.checked_mul(2)) else {
        return FlexchanStatus::InvalidArgument;
    };
    if snapshots == 0 || k == 0 {
        return FlexchanStatus::InvalidArgument;
    }
    let raw = std::slice::from_raw_parts(data, n_doubles);
    let y = DMatrix::from_fn(m, snapshots, |mm, tt| {
        let base = 2 * (tt * m + mm);
        c64(raw[base], raw[base + 1])
    });
    let method = if use_newton != 0 { SearchMethod::Newton } else { SearchMethod::Grid };
    let cfg = SearchConfig::default();
    let res = match order {
        FlexchanOrder::Second => flexchan::soc::estimate_doa_soc(&y, g, k, method, &cfg),
        FlexchanOrder::Fourth => flexchan::foc::estimate_doa_foc(&y, g, k, method, &cfg),
    };
    match res {
        Ok(est) => {
            let angles = est.angles_deg();
            for (i, &a) in angles.iter().enumerate() {
                *out_angles_deg.add(i) = a;
            }
            *out_detected = angles.len();
            FlexchanStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Closed-form NMSE levels for the conventional and sensing-assisted pilot
/// strategies, plus their pilot-overhead ratio `n_ports / k`.
///
/// # Safety
/// Out-pointers must each be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn flexchan_theoretical_nmse(
    n_ports: usize,
    m: usize,
    k: usize,
    pilot_len: usize,
    noise_power: f64,
    mean_power: f64,
    out_conventional: *mut f64,
    out_sensing_assisted: *mut f64,
    out_overhead_ratio: *mut f64,
) -> FlexchanStatus {
    if out_conventional.is_null() || out_sensing_assisted.is_null() || out_overhead_ratio.is_null()
    {
        return FlexchanStatus::NullArgument;
    }
    match theoretical_nmse(n_ports, m, k, pilot_len, noise_power, mean_power) {
        Ok(t) => {
            *out_conventional = t.conventional;
            *out_sensing_assisted = t.sensing_assisted;
            *out_overhead_ratio = t.overhead_ratio;
            FlexchanStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn flexchan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
