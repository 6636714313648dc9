use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("time weights of query {query} sum to {sum}, cannot normalize")]
    Weights { query: usize, sum: f64 },

    #[error("malformed clip sequence: {0}")]
    ClipSequence(String),

    #[error("scenario generation failed: {0}")]
    Scenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
