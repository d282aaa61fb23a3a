use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distributions are defined over different outcome lists")]
    DomainMismatch,

    #[error("outcome index {index} out of range for {len} outcomes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("negative input {0} where a non-negative value is required")]
    NegativeInput(f64),

    #[error("reference distribution has zero information dispersion")]
    DegenerateReference,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no conditional table for node `{0}`")]
    MissingCpt(String),

    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("network already contains a hidden variable")]
    DuplicateHidden,

    #[error("hidden variable spec selects no variables")]
    EmptySpec,

    #[error("network has no hidden variable")]
    NoHiddenVariable,

    #[error("no records to learn from")]
    EmptyData,

    #[error("action magnitude {value} outside [{min}, {max}]")]
    DomainViolation { value: f64, min: f64, max: f64 },

    #[error("variable cardinality must be at least 2")]
    CardinalityOne,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("target entropy given its own past is zero")]
    ZeroBaseEntropy,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("bundles are not comparable: {0}")]
    BundleMismatch(String),

    #[error("replay diverged in: {}", .files.join(", "))]
    ReplayDivergence { files: Vec<String> },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
