use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transition matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("chain is not reversible (detailed-balance residual {residual:.3e})")]
    ReversibilityViolation { residual: f64 },

    #[error("spectral gap {delta:.3e} is below the walk-construction threshold")]
    GapTooSmall { delta: f64 },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("size guard: n = {n} exceeds the limit {limit} for {what}")]
    SizeGuard { what: &'static str, n: usize, limit: usize },

    #[error("filter gap {filter_gap} exceeds the walk phase gap {walk_gap}")]
    GapMismatch { filter_gap: f64, walk_gap: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("precondition violated at stage {stage}: {message}")]
    Precondition { stage: usize, message: String },

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
