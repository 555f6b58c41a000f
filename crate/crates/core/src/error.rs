use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("insufficient inliers: {0}")]
    InsufficientInliers(String),
    #[error("too few samples for {model}: need at least {needed}, got {got}")]
    TooFewSamples {
        model: String,
        needed: usize,
        got: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid fold configuration: {0}")]
    InvalidFolds(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("single-class training data for binary model {0}")]
    SingleClass(String),
    #[error("failed to converge: {0}")]
    NoConvergence(String),
    #[error("unknown model: {0}")]
    UnknownModel(String),
    #[error("empty toolbox")]
    EmptyToolbox,
}
