use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("feature matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label {0} is not binary (expected 0 or 1)")]
    NonBinaryLabel(u64),
    #[error("dataset needs at least {0}")]
    Degenerate(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("split leaves the {0} partition empty")]
    EmptyPartition(&'static str),
    #[error("class counts must not all be zero")]
    EmptyCounts,
    #[error("cannot draw {requested} features: only {available} have positive probability")]
    TooFewCandidates { requested: usize, available: usize },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("{0} samples exceeds the supported maximum of 2^26")]
    TooManySamples(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
