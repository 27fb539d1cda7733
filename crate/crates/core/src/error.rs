use thiserror::Error;

/// Structural failures: malformed input, violated preconditions, or an
/// internal identity that should hold by construction but did not.
///
/// Mathematical outcomes (non-representable martingales, infeasible sites,
/// non-viable markets) are not errors of this kind; they have dedicated
/// witness types in their modules.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
