use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("invalid config: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 2,
            Self::Format(_) => 3,
            Self::Missing(_) => 4,
            Self::Config(_) => 5,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            context: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
