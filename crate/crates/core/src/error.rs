use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("missing data: {0}")]
    Missing(String),
}

pub type Result<T> = std::result::Result<T, Error>;
