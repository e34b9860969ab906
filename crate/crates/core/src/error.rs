use thiserror::Error;

/// Errors produced by the channel model, the reconstruction engine and the predictors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("degenerate channel: superposition of paths has zero energy")]
    DegenerateChannel,

    #[error("combiner Gram matrix of slot {slot} is not positive definite")]
    CombinerDegenerate { slot: usize },

    #[error("pseudo-inverse is unstable: measurement matrix is rank deficient (condition number ~ {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("empty input")]
    EmptyInput,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("non-positive value in log-log fit")]
    NonPositive,

    #[error("denoiser failed: {0}")]
    Denoiser(#[source] Box<dyn std::error::Error + Send + Sync>),

    #[error("dataset format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
