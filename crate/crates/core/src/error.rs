use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or posterior specification violates its invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// A scalar argument lies outside the domain of a closed-form formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller broke an operation's precondition (shapes, symmetry, ordering).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A gradient or loss evaluation produced NaN or infinity.
    #[error("non-finite value in {context} (sample {sample})")]
    NonFinite { context: String, sample: usize },

    /// A run left its domain or overflowed.
    #[error("divergent run: {0}")]
    Divergent(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }
}
