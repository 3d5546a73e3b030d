use std::fmt;

use serde::Serialize;

/// Error reported by the command line: a stable `kind` tag plus a message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("io", message)
    }

    pub fn missing_artifact(message: impl Into<String>) -> Self {
        Self::new("missing_artifact", message)
    }

    /// `{"error":{"kind":…,"message":…}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<qrng_core::Error> for CliError {
    fn from(e: qrng_core::Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}
