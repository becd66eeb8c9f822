use std::path::Path;
use thiserror::Error;

/// User errors exit with 1, internal errors with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn user(msg: impl std::fmt::Display) -> Self {
        CliError::User(msg.to_string())
    }

    pub fn at(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::User(format!("{}: {msg}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
