use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input files.
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Model(#[from] mltrp::Error),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for anything the caller can fix by changing inputs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Read { .. } => 2,
            CliError::Model(mltrp::Error::NonFinite(_)) => 1,
            CliError::Model(_) => 2,
            CliError::Write { .. } | CliError::Serialize(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
