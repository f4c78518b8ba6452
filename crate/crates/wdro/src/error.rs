use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Core(#[from] wdro_core::Error),
    #[error("check failed: {0}")]
    Check(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// 1 for bad invocations and unreadable inputs, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(wdro_core::Error::InvalidConfig(_)) => 1,
            Error::Usage(_) | Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => 1,
            Error::Core(_) | Error::Check(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
