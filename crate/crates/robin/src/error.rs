use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    ParseConfig { path: PathBuf, message: String },
    #[error("config {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {message}")]
    InputFile { path: PathBuf, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] robin_core::Error),
    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// 0 success, 1 numerical failure, 2 usage or configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. }
            | CliError::ParseConfig { .. }
            | CliError::Invalid { .. }
            | CliError::InputFile { .. } => 2,
            CliError::Output { .. } | CliError::Numerical(_) | CliError::ChecksFailed(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
