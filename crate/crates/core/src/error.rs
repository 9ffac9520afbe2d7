use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates the operation contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A structural precondition does not hold (e.g. a matrix that must be
    /// positive definite is not).
    #[error("precondition violation: {0}")]
    PreconditionViolation(String),

    /// The black-box oracle returned a non-finite value. Runs abort instead
    /// of propagating NaN through the estimators.
    #[error("oracle failure during {phase}: {detail}")]
    OracleFailure { phase: &'static str, detail: String },

    /// A diagnostic was requested on a problem that cannot supply it.
    #[error("unsupported diagnostic: {0}")]
    UnsupportedDiagnostic(&'static str),

    /// Malformed input data.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A condition that should be impossible for well-formed inputs.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
