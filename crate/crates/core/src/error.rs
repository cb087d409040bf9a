use alloc::string::String;

/// Errors raised by the characterization core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("singular S-to-cascade conversion at {frequency} Hz (|s21| = {magnitude:e})")]
    SingularConversion { frequency: f64, magnitude: f64 },

    #[error("singular cascade matrix at {frequency} Hz")]
    SingularMatrix { frequency: f64 },

    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no line pair survived at {frequency} Hz")]
    NoSurvivingPair { frequency: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing values: {0}")]
    Missing(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("search error: {0}")]
    Search(String),

    #[error("extraction error: {0}")]
    Extraction(String),
}

pub type Result<T> = core::result::Result<T, Error>;
