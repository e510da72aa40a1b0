use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dmn_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for usage and configuration, 3 for bad input data, 4 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        use dmn_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Config(_) => 2,
                E::Parse { .. }
                | E::EmptyLog(_)
                | E::VocabularyEmpty
                | E::DecreasingTimestamps { .. }
                | E::InvalidTau(_)
                | E::Mismatch(_)
                | E::Data(_)
                | E::Io { .. }
                | E::Json(_) => 3,
                _ => 4,
            },
            CliError::Io { .. } => 4,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
