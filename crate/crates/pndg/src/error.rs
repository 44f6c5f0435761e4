//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes surfaced by the library.
///
/// The command-line driver maps these onto process exit codes: configuration
/// problems exit with 1, solver failures with 2, and failed verification
/// checks with 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller passed arguments that violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration file or command line could not be interpreted, or
    /// the requested parameters violate the model assumptions.
    #[error("configuration error: {0}")]
    Config(String),

    /// A linear solve failed to factorise or to reach its tolerance.
    #[error("solver error: {0}")]
    Solver(String),

    /// An input or output file could not be read or written.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal consistency check failed; this indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Shorthand for an [`Error::InvalidInput`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Shorthand for an [`Error::Config`] with a formatted message.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Prefixes the message with a context note, keeping the failure class.
    pub fn annotate(self, context: &str) -> Self {
        match self {
            Error::InvalidInput(msg) => Error::InvalidInput(format!("{context}: {msg}")),
            Error::Config(msg) => Error::Config(format!("{context}: {msg}")),
            Error::Solver(msg) => Error::Solver(format!("{context}: {msg}")),
            Error::Io(err) => Error::Io(std::io::Error::new(
                err.kind(),
                format!("{context}: {err}"),
            )),
            Error::Internal(msg) => Error::Internal(format!("{context}: {msg}")),
        }
    }
}
