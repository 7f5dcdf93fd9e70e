//! Crate-wide error type and process exit-code mapping.

use thiserror::Error;

/// Errors produced by matrix construction, statistic models, detectors and
/// the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent configuration (dimension mismatch, bad field values).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument is outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Fiducial search exhausted its restarts.
    #[error("fiducial search failed: best residual {best_residual:.3e} above tolerance {tol:.3e}")]
    SearchFailed { best_residual: f64, tol: f64 },

    /// A matrix expected to be Hermitian positive-definite was not.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A submatrix was numerically rank-deficient.
    #[error("numeric rank failure: {0}")]
    NumericRank(String),

    /// Construction not available for the requested dimension/degree.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A capacity limit (candidate supports, code family size) was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Too few Monte Carlo runs survived conditioning to form an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Threshold calibration could not reach the requested operating point.
    #[error("calibration failed: achieved T_r {achieved:.1}, target {target:.1}")]
    Calibration { achieved: f64, target: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    /// CLI exit code: 0 success, 2 config error, 3 numeric failure,
    /// 4 capacity/unsupported.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::Parse(_) | Error::Io(_) => 2,
            Error::SearchFailed { .. }
            | Error::NotPositiveDefinite
            | Error::NumericRank(_)
            | Error::InsufficientData(_)
            | Error::Calibration { .. } => 3,
            Error::Unsupported(_) | Error::Capacity(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
