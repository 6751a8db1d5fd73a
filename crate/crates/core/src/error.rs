use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("non-finite entry in numeric input: {0}")]
    NumericInput(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row}, threshold {threshold:e})")]
    NotPositiveDefinite { row: usize, pivot: f64, threshold: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical procedure failed: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
