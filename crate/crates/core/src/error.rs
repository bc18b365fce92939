use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate a documented precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular matrix")]
    SingularMatrix,

    /// Randomized generation gave up after exhausting its retry budget.
    #[error("generation failure: {0}")]
    GenerationFailure(String),

    /// Public data is inconsistent with an honest protocol run.
    #[error("integrity failure: {0}")]
    IntegrityFailure(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error(
        "search space of {space} sequences exceeds the guardrail of {limit} \
         (multiset count {multiset}); pass an explicit override to enumerate anyway"
    )]
    Guardrail {
        space: String,
        multiset: String,
        limit: u64,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
