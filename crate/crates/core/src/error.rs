use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("key of {len} bytes exceeds the {max}-byte limit of the hardened key encoding")]
    KeyTooLong { len: usize, max: usize },

    #[error("block is {0} bytes, expected 16")]
    BlockWidth(usize),

    #[error("block is not the image of a padded key")]
    CorruptBlock,

    #[error("refusing to write an empty run")]
    EmptyRun,

    #[error("run input is not strictly sorted at position {0}")]
    UnsortedRun(usize),

    #[error("entry of {size} bytes exceeds the maximum of {max} bytes")]
    EntryTooLarge { size: usize, max: usize },

    #[error("corrupt run {path}: {reason}")]
    CorruptRun { path: PathBuf, reason: String },

    #[error("cannot open store at {path}: {reason}")]
    OpenFailed { path: PathBuf, reason: String },

    #[error("empty key")]
    EmptyKey,

    #[error("no run at level {level}, position {index}")]
    UnknownRun { level: usize, index: usize },

    #[error("candidate budget of {0} exhausted before the filter saturated")]
    BudgetExhausted(u64),

    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::CorruptRun {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
