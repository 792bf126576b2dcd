use thiserror::Error;

/// Errors produced by the lsncp library.
#[derive(Debug, Error)]
pub enum LsnError {
    #[error("series too short: need at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("invalid window (s={start}, k={split}, e={end}): {reason}")]
    InvalidWindow {
        start: usize,
        split: usize,
        end: usize,
        reason: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("window estimator failed at split k={split}: {reason}")]
    EstimatorFailed { split: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "circulant embedding not positive semi-definite for H={hurst}, n={n} \
         (min eigenvalue {min_eigenvalue:e})"
    )]
    EmbeddingNotPsd {
        hurst: f64,
        n: usize,
        min_eigenvalue: f64,
    },

    #[error("unknown significance level alpha={0}; embedded tables cover 0.10, 0.05, 0.01")]
    UnknownAlpha(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LsnError {
    pub fn invalid_parameter(name: &'static str, reason: impl Into<String>) -> Self {
        LsnError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LsnError>;
