use thiserror::Error;

/// Errors raised by tensor algebra, measurement, solver and analysis routines.
#[derive(Debug, Error)]
pub enum TubalError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("Fourier tensor is not conjugate-symmetric (relative imaginary residual {residual:.3e})")]
    SymmetryViolation { residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A theoretical precondition (e.g. the t-RIC threshold) does not hold.
    #[error("condition failure: {0}")]
    ConditionFailure(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TubalError>;
