use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Every message names the violated precondition so the CLI can print it as-is.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KgError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A result or intermediate would overflow, or the input is outside the
    /// documented accuracy envelope.
    #[error("range error: {0}")]
    Range(String),
    /// A caller-supplied precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A guarantee that must follow from the preconditions failed.
    #[error("internal contract violation: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, KgError>;

pub(crate) fn domain(msg: impl Into<String>) -> KgError {
    KgError::Domain(msg.into())
}

pub(crate) fn range(msg: impl Into<String>) -> KgError {
    KgError::Range(msg.into())
}
