use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate. The CLI maps each variant to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration fault: non-finite state after step ({0})")]
    IntegrationFault(String),

    #[error("storage error: {0}")]
    Storage(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("batch too small: {0}")]
    BatchTooSmall(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::CorruptFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
