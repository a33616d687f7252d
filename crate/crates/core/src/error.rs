use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum CovError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not PSD within budget (most negative pivot {pivot:e})")]
    NotPositiveSemidefinite { pivot: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("operator is identically zero")]
    ZeroOperator,

    #[error("grid of {points_per_axis} points per axis is not aligned with {cells_per_axis} cells per axis")]
    Misaligned {
        points_per_axis: usize,
        cells_per_axis: usize,
    },

    #[error("grid size overflows: {0}")]
    Overflow(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("kernel cannot be evaluated pointwise: {0}")]
    NotPointwise(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CovError>;
