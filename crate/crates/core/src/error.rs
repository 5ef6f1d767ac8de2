use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("terminology contains no valid records")]
    EmptyTerminology,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty after applying min_count = {0}")]
    EmptyVocabulary(u64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("unrepresentable string: {0:?}")]
    Unrepresentable(String),

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("no candidates left to rank")]
    EmptyCandidates,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corrupt embedding file: {0}")]
    Corrupt(String),

    #[error("{0}")]
    Eval(String),
}

impl Error {
    /// Attach a file path to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
