use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric at ({i}, {j}): {a} != {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("operation requires a block partition")]
    MissingPartition,

    #[error("block index {index} out of range (model has {blocks} blocks)")]
    BlockOutOfRange { index: usize, blocks: usize },

    #[error("entry {index} is not a binary value: {value}")]
    NotBinary { index: usize, value: u8 },

    #[error("entry {index} is not a spin value: {value}")]
    NotSpin { index: usize, value: i8 },

    #[error("non-finite coefficient at {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid price data: {0}")]
    InvalidData(String),

    #[error("insufficient history: need {needed} prices, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("model file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("backend {backend} failed: {message}")]
    Backend { backend: String, message: String },

    #[error("block {block} solve failed in iteration {iteration}: {source}")]
    BlockSolve {
        iteration: usize,
        block: usize,
        source: Box<Error>,
    },

    #[error("problem too large for exhaustive search: {n} variables (cap {cap})")]
    TooLarge { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn backend(backend: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Backend {
            backend: backend.into(),
            message: message.into(),
        }
    }
}
