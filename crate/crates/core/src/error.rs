use thiserror::Error;

/// Errors raised by the surrogate, optimizers and experiment harness.
#[derive(Debug, Error)]
pub enum GeboError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonpositive diagonal entry {value:e} at index {index} of the covariance matrix")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error(
        "Cholesky factorization failed at pivot {pivot} (n = {size}, diagonal entry {value:e}, \
         nugget {nugget:e}, max |entry| {max_abs:e})"
    )]
    Factorization {
        pivot: usize,
        size: usize,
        value: f64,
        nugget: f64,
        max_abs: f64,
    },

    #[error("variance ratio {0:e} outside [0, 1]: broken factorization")]
    VarianceOutOfRange(f64),

    #[error("closed-form hyperparameter failed: {0}")]
    ClosedForm(String),

    #[error("Newton iteration did not converge at t = {time} (residual {residual:e})")]
    NewtonDivergence { time: f64, residual: f64 },

    #[error("objective evaluation failed: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GeboError>;
