use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("processor count must be at least 1")]
    ZeroProcessors,

    #[error("processor count {0} exceeds the supported maximum {max}", max = crate::MAX_PROCS)]
    TooManyProcessors(usize),

    #[error("rank {rank} out of range for {p} processors")]
    RankOutOfRange { rank: usize, p: usize },

    #[error("block count must be at least 1")]
    ZeroBlocks,

    #[error("size vector has {got} entries, expected {expected}")]
    SizesLength { got: usize, expected: usize },

    #[error("invalid processor range {lo}:{hi}")]
    InvalidRange { lo: usize, hi: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
