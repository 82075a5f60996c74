use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("block index {index} out of range ({blocks} blocks)")]
    BlockIndex { index: usize, blocks: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix not symmetric positive definite (pivot {pivot:e} at row {row})")]
    NotSpd { row: usize, pivot: f64 },

    #[error("singular matrix")]
    Singular,

    #[error("ill-conditioned matrix (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("rank-deficient matrix")]
    RankDeficient,

    #[error("invalid schedule parameter `{name}`: {reason}")]
    Schedule { name: &'static str, reason: String },

    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("non-finite gradient at coordinate {0}")]
    NonFiniteGradient(usize),

    #[error("weight accumulator overflowed at step {0}; use the EMA form")]
    WeightOverflow(u64),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
