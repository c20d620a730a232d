//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus and artifact I/O, format parsing, and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate document id {id:?}")]
    DuplicateId { id: String },

    #[error("unknown document id {id:?} in {what}")]
    UnknownId { id: String, what: String },

    #[error("missing {what} for document id {id:?}")]
    MissingForId { id: String, what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("invalid checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn malformed(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}
