use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("record {id:?} (line {line}): {reason}")]
    InvalidRecord {
        id: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("line {line}: unknown cancer type {cancer:?}")]
    UnknownCancer { line: usize, cancer: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("attribute {attribute:?} is not annotated in document {id:?}")]
    MissingAnnotation { id: String, attribute: String },

    #[error("invalid stage token {0:?}")]
    InvalidStage(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
