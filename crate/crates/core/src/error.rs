use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("resource limit: {what} requires {required}, allowed {allowed}")]
    Resource {
        what: String,
        required: u128,
        allowed: u128,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("regime violation: {0}")]
    Regime(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
