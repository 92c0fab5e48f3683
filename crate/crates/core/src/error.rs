use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("expected {expected} query rows, got {actual}")]
    QueryRows { expected: usize, actual: usize },

    #[error("invalid matrix shape: {0}")]
    Shape(String),

    #[error("cosine similarity requires l2-normalized input")]
    NotNormalized,

    #[error("passage matrix has no rows")]
    EmptyPassage,

    #[error("dimension {0} is not a multiple of 8")]
    NotByteAligned(usize),

    #[error("unknown passage id {0:?}")]
    UnknownPassage(String),

    #[error("duplicate passage id {0:?}")]
    DuplicatePassage(String),

    #[error("incompatible index: {0}")]
    Incompatible(String),

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("corrupt index: {0}")]
    Corrupt(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("conflicting grade for ({qid}, {pid}): {first} vs {second}")]
    ConflictingGrade {
        qid: String,
        pid: String,
        first: u32,
        second: u32,
    },

    #[error("word {0:?} not found")]
    WordNotFound(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
