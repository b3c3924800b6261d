use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure in {context} after {iterations} iterations: {detail}")]
    Numerical {
        context: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("degenerate null ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid input specification: {0}")]
    InvalidSpec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
