use std::path::{Path, PathBuf};

use qdsim::error::SimError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const IO: i32 = 4;
    pub const CHECK_FAILED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(#[from] SimError),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    Check(String),
}

impl RunError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        RunError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => exit::CONFIG,
            RunError::Numerical(_) => exit::NUMERICAL,
            RunError::Io { .. } => exit::IO,
            RunError::Check(_) => exit::CHECK_FAILED,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
