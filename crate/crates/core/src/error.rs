use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("layer mismatch: {0}")]
    LayerMismatch(String),

    #[error("model has no common layers")]
    NoCommonLayers,

    #[error("loss {loss} is incompatible with a {head} head")]
    IncompatibleLoss { loss: &'static str, head: &'static str },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("perturbation failed: {0}")]
    Perturbation(String),

    #[error("{path}: row {row} (line {line}), column {column}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite loss at node {path} (round {round}, epoch {epoch})")]
    NonFiniteLoss { path: String, round: usize, epoch: usize },

    #[error("creating replica node {path}: {source}")]
    ReplicaCreation {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round}, node {path}: {source}")]
    AtNode {
        round: usize,
        path: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}
