use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain an operation accepts.
    #[error("input domain: {0}")]
    InputDomain(String),

    /// A factorization or quadrature did not succeed.
    #[error("numerical: {message} ({diagnostics})")]
    Numerical { message: String, diagnostics: String },

    /// The endpoint could not be reached or kept failing.
    #[error("transport: {message}{}", .status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },

    /// A replayed or referenced record does not exist.
    #[error("lookup: {0}")]
    Lookup(String),

    /// Invalid configuration or command-line usage.
    #[error("usage: {0}")]
    Usage(String),

    /// Malformed data file.
    #[error("parse {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("digest mismatch for {path}: manifest has {expected}, file has {actual}")]
    DigestMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
