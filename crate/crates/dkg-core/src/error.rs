use thiserror::Error;

#[derive(Debug, Error)]
pub enum DkgError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite field detected at t = {t}")]
    NonFinite { t: f64 },

    #[error("too few samples: need {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("{0}")]
    Numerics(String),
}
