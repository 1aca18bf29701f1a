use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("logistic regression did not converge after {iterations} iterations (max |score| = {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("logistic regression coefficients diverge (norm {norm:.3e}); the classes look separable, set a positive ridge penalty")]
    Separation { norm: f64 },

    #[error("design matrix is rank deficient ({rank} < {cols}); set a positive ridge penalty")]
    RankDeficient { rank: usize, cols: usize },

    #[error("requested {requested} draws but the chain retained only {available}")]
    NotEnoughDraws { requested: usize, available: usize },

    #[error("unknown row id {0} for a tabulated pilot")]
    UnknownRow(usize),

    #[error("{failed} of {total} replications failed (limit 1%); first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },

    #[error("csv error at row {row}, column `{column}`: {reason}")]
    Csv { row: usize, column: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
