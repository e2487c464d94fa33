use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = LscdError> = std::result::Result<T, E>;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum LscdError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("no shared vocabulary")]
    NoSharedVocabulary,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),

    #[error("{0}")]
    Undefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("target sets differ: {0}")]
    TargetMismatch(String),
}

impl LscdError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        LscdError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, line: usize, message: impl Into<String>) -> Self {
        LscdError::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            LscdError::Config(_) => ErrorKind::Usage,
            LscdError::Divergence(_) | LscdError::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
