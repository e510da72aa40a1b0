use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient in parameter group `{group}` (parameter `{param}`)")]
    NonFiniteGradient { group: String, param: String },

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{0}: no events")]
    EmptyLog(PathBuf),

    #[error("vocabulary empty: every event was filtered out")]
    VocabularyEmpty,

    #[error("timestamps decrease at index {index} ({prev} > {next})")]
    DecreasingTimestamps { index: usize, prev: i64, next: i64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{kind} id {id} out of range (size {size})")]
    IdOutOfRange { kind: &'static str, id: usize, size: usize },

    #[error("inter-arrival time must be positive and finite, got {0}")]
    InvalidTau(f64),

    #[error("training diverged in stage {stage} at epoch {epoch}: non-finite loss")]
    Diverged { stage: u8, epoch: usize },

    #[error("text provider `{provider}` failed: {msg}")]
    Provider { provider: String, msg: String },

    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
