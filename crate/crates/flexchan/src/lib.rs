//! Sensing-assisted channel estimation for flexible-antenna front ends.
//!
//! A flexible array exposes N ports on a uniform grid but only M << N RF
//! chains, wired to a selected port subset. This crate estimates the full
//! N-port channel from that subset: payload snapshots drive blind DOA
//! estimation (second-order MUSIC, or fourth-order cumulant MUSIC on the
//! difference co-array for underdetermined and noise-robust operation), a
//! short pilot block calibrates per-user complex path gains by least squares,
//! and the channel is reconstructed over the whole aperture from the
//! recovered angles and gains.
//!
//! Modules follow the pipeline: [`array`] (geometry, steering, co-arrays),
//! [`signals`] (source/pilot/noise synthesis), [`subspace`] (scan and Newton
//! search shared by both spectra), [`soc`] / [`foc`] (the two estimators),
//! [`channel`] (calibration, reconstruction, metrics), [`bench`] (seeded
//! Monte Carlo harness with CSV output, exposed by the `flexchan` binary).

// Validation guards use the `!(x > 0.0)` form on purpose: it rejects NaN
// along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod bench;
pub mod channel;
mod error;
pub mod foc;
pub mod signals;
pub mod soc;
pub mod subspace;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = nalgebra::Complex<f64>;

/// Shorthand constructor for [`C64`].
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    nalgebra::Complex::new(re, im)
}
