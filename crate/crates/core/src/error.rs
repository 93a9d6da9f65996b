use thiserror::Error;

use crate::linalg::Matrix;

pub type Result<T, E = LqtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LqtError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{what} must be symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("{what} contains non-finite entries")]
    NonFinite { what: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} is singular or numerically not positive definite")]
    Singular { what: &'static str },

    #[error("gain is not stabilizing: spectral radius of sqrt(gamma)*(T - B1 K) is {spectral_radius:.6} (must be < 1)")]
    NotStabilizing { spectral_radius: f64 },

    #[error("policy iteration did not converge within {iterations} iterations (last gain change {last_change:e})")]
    NoConvergence {
        iterations: usize,
        last_change: f64,
        last_gain: Box<Matrix>,
        last_value: Box<Matrix>,
    },

    #[error("time {t} outside the gain schedule range [{first}, {last}]")]
    OutOfRange { t: i64, first: i64, last: i64 },

    #[error("regression matrix is rank deficient ({rank} of {unknowns} unknowns determined); use a regularisation parameter mu > 0")]
    RankDeficient { rank: usize, unknowns: usize },

    #[error("degenerate training data: {reason}")]
    DegenerateData { reason: String },

    #[error("state norm {norm:e} exceeded the overflow guard at t = {t}")]
    Unstable { t: usize, norm: f64 },

    #[error("kernel estimate diverged: max-abs entry {norm:e} at iteration {iteration}")]
    Divergence { iteration: usize, norm: f64 },

    #[error("dataset I/O: {0}")]
    Csv(#[from] csv::Error),

    #[error("dataset format: {0}")]
    Format(String),
}

impl LqtError {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        LqtError::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
