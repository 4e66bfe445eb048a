use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UnpastError {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl UnpastError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UnpastError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        UnpastError::Parse { path: path.into(), line, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        UnpastError::Invalid(message.into())
    }
}

pub type Result<T> = std::result::Result<T, UnpastError>;
