use fhedse::flashsim::SimError;
use fhedse::perfmodel::ModelError;
use serde_json::json;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A spec, config or override failed validation.
    #[error("{kind}: {message}")]
    Invalid { kind: String, message: String },
    #[error("CheckFailed: {message}")]
    CheckFailed { message: String, failing: Vec<String> },
    #[error("IoError: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(kind: &str, message: impl Into<String>) -> Self {
        CliError::Invalid {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::invalid("InvalidConfig", message)
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid { .. } | CliError::CheckFailed { .. } => 1,
            CliError::Io { .. } => 2,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let value = match self {
            CliError::Invalid { kind, message } => json!({ "error": kind, "message": message }),
            CliError::CheckFailed { message, failing } => {
                json!({ "error": "CheckFailed", "message": message, "failing": failing })
            }
            CliError::Io { path, source } => {
                json!({ "error": "IoError", "message": source.to_string(), "path": path })
            }
        };
        value.to_string()
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::invalid(e.kind(), e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::invalid(e.kind(), e.to_string())
    }
}
