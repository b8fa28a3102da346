use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("IDX format error: {0}")]
    Format(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("label {label} out of range for {heads} heads")]
    Label { label: usize, heads: usize },

    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exemplar memory is empty")]
    EmptyMemory,

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("invalid evaluation: {0}")]
    InvalidEval(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
