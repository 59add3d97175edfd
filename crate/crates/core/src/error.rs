//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("model losses are required for Rashomon-set filtering but are missing")]
    MissingLosses,

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error(
        "empty Rashomon set: no model loss within epsilon; \
         the smallest qualifying epsilon is {min_epsilon}"
    )]
    EmptyRashomonSet { min_epsilon: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error(
        "logistic training diverged (non-finite loss or singular normal equations); \
         the data may be linearly separable — add regularization or reduce max_iters"
    )]
    Separable,
}
