use std::fmt;

use covlab::CovError;

/// Error carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or preconditions (exit 2).
    Usage(String),
    /// Numerical failure or failed certificate (exit 1).
    Numeric(String),
    /// Some sweep trials failed (exit 3).
    Partial(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Numeric(_) => 1,
            Self::Usage(_) => 2,
            Self::Partial(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Numeric(m) | Self::Partial(m) => f.write_str(m),
        }
    }
}

impl From<CovError> for CliError {
    fn from(e: CovError) -> Self {
        let msg = e.to_string();
        match e {
            CovError::InvalidParameter(_)
            | CovError::DimensionMismatch { .. }
            | CovError::Misaligned { .. }
            | CovError::Overflow(_)
            | CovError::Precondition(_)
            | CovError::NotPointwise(_)
            | CovError::Parse(_) => Self::Usage(msg),
            CovError::NotSymmetric { .. }
            | CovError::NotPositiveSemidefinite { .. }
            | CovError::Singular(_)
            | CovError::ZeroOperator
            | CovError::NoConvergence(_)
            | CovError::Numeric(_)
            | CovError::Io(_)
            | CovError::Csv(_) => Self::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Numeric(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
