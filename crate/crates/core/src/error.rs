use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("answer span cannot be recovered: {0}")]
    Unrecoverable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("gold span of sample {0} falls outside the input window")]
    SpanOutOfWindow(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("incomplete teacher logits: {0}")]
    IncompleteLogits(String),
    #[error("no valid answer span")]
    NoValidSpan,
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(what: impl Into<String>) -> Self {
        Error::Shape(what.into())
    }
}
