use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computed quantity violated an invariant that rounding alone cannot explain.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A learner's particles left the admissible return range.
    #[error("learner diverged at step {step}: |particle| = {magnitude} exceeds {bound}")]
    Divergence { step: u64, magnitude: f64, bound: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
