//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A schedule, model, or decoder parameter violates its contract.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A probability table failed validation (negative mass, bad sum, duplicates).
    #[error("invalid distribution: {0}")]
    Distribution(String),

    /// Exact enumeration would exceed the configured cell budget.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    /// A value function could not be evaluated at the requested state.
    #[error("value evaluation failed: {0}")]
    Value(String),

    /// The operation is not defined for this model family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed input file (data table, mixture spec, serialized value).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
