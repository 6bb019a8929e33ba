use thiserror::Error;

/// Library error type. Variants distinguish contract violations (geometry,
/// dimensions, config) from statistical identifiability limits and numerical
/// failure of the calibration solve.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("pilot: {0}")]
    Pilot(String),

    /// Too many sources for the statistic in use (K >= M for second order,
    /// K > co-array DOF for fourth order, K > block pilot length for the
    /// conventional estimator).
    #[error("not identifiable: {0}")]
    Unidentifiable(String),

    /// Calibration normal matrix condition number above the safety cutoff.
    #[error("calibration ill-conditioned (cond = {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
