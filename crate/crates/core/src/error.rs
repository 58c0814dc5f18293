//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("Fock index {index} is outside the truncated basis of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("basis dimension must be at least 2, got {0}")]
    BadDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("integrator failed: {0}")]
    Integrator(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("series did not converge: {0}")]
    NonConvergence(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Parse(String),
}

impl From<csv::Error> for FockError {
    fn from(e: csv::Error) -> Self {
        FockError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FockError>;
