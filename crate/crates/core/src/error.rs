use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("count overflow in stream {stream_id} at generation {generation}")]
    Overflow { stream_id: u64, generation: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
