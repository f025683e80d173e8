use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance generation failed: {0}")]
    GenerationFailed(String),

    #[error("model has {count} binaries, exhaustive enumeration is limited to {limit}")]
    TooManyBinaries { count: usize, limit: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("expansion did not reach coverage after {0} subsets")]
    CoverageNotReached(usize),

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
