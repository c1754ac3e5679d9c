use thiserror::Error;

/// Errors raised while building or solving a conic program.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("solver tolerance {0:e} outside [1e-10, 1e-4]")]
    Tolerance(f64),
}
