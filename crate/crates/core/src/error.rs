use thiserror::Error;

/// Errors produced by channel construction, filter design, detection and
/// simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("expected-concentration curve is identically zero on the search bracket")]
    ZeroCurve,

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("ISI enumeration over 2^{0} patterns exceeds the 2^24 limit")]
    TooManyPatterns(usize),

    #[error("noise-plus-interference matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("filter weights must be finite and not all zero")]
    InvalidFilter,

    #[error("SINR denominator is not positive")]
    DegenerateSinr,

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
