use std::fmt;

use oodlens_core::analysis::AnalysisError;
use oodlens_core::ingest::IngestError;

/// A failed command. Printed as one `error[code]: message` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {}", self.code, one_line)
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Invalid(_) => Self::new("invalid_dataset", e.to_string()),
            IngestError::Codec(_) => Self::new("invalid_dataset", e.to_string()),
            IngestError::Io { .. } => Self::new("io", e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Ingest(inner) => inner.into(),
            AnalysisError::Cache { .. } => Self::new("cache", e.to_string()),
            AnalysisError::Codec(_) => Self::new("cache", e.to_string()),
            AnalysisError::Scoring { .. } => Self::new("scoring", e.to_string()),
            AnalysisError::Clustering(_) => Self::new("clustering", e.to_string()),
        }
    }
}
