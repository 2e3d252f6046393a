use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: expected {expected} coordinates, got {got}")]
    DomainMismatch { expected: usize, got: usize },

    #[error("coordinate {index} = {value} is outside 0..{levels}")]
    OutOfDomain { index: usize, value: usize, levels: usize },

    #[error("domain too large to enumerate: {size} points exceeds the cap of {cap}")]
    TooLargeToEnumerate { size: String, cap: u64 },

    #[error("invalid simplex block {block}: {reason}")]
    InvalidSimplex { block: usize, reason: String },

    #[error("block index {index} out of range for {blocks} blocks")]
    BlockOutOfRange { index: usize, blocks: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weight table for customer {customer}, facility {facility} is not monotone at level {level}")]
    NonMonotoneTable {
        customer: usize,
        facility: usize,
        level: usize,
    },

    #[error("{path}:{line}: {message}")]
    EdgeList {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Bundle(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
