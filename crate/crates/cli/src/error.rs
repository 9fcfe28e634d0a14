use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nibr_core::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Parse { .. } | CliError::Input(_) => "parse",
            CliError::Config(_) => "invalid_config",
            CliError::Io { .. } => "io",
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

/// Machine-readable error written in place of a result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
}

impl From<&CliError> for ErrorObject {
    fn from(e: &CliError) -> Self {
        let line = match e {
            CliError::Parse { line, .. } => Some(*line),
            _ => None,
        };
        ErrorObject { kind: e.kind().to_string(), message: e.to_string(), line }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
