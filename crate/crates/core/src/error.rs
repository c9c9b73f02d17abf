use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("mask order violated: {from} does not precede {to}")]
    MaskOrder { from: String, to: String },

    #[error("mask/value mismatch at coordinate {index}")]
    MaskValueMismatch { index: usize },

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("invalid weight {0}: weights must be finite and nonnegative")]
    InvalidWeight(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("amputation calibration failed: {0}")]
    Calibration(String),

    #[error("outside the supported domain: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("group {group} unreachable after {attempts} draws ({accepted} accepted)")]
    UnreachableGroup {
        group: String,
        attempts: usize,
        accepted: usize,
    },
}
