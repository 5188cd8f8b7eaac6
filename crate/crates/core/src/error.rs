//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    /// A utility gradient is unbounded at the given point, e.g. a log or
    /// harmonic objective with zero regularizer evaluated where a user rate
    /// vanishes.
    #[error("gradient unbounded: {0}")]
    UnboundedGradient(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
