use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent out of range: {0}")]
    ExponentRange(String),

    #[error("fields live on different grids")]
    DomainMismatch,

    #[error("field has rank {found}, expected {expected}")]
    RankMismatch { expected: usize, found: usize },

    #[error("non-finite sample at node {0}")]
    NonFinite(usize),

    #[error("point ({0}) lies outside the sampled region")]
    OutsideDomain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
