use thiserror::Error;

/// Errors raised by the negotiation engine and its analytic toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The feasible region of a linear program is empty.
    #[error("infeasible linear program: {0}")]
    Infeasible(String),

    #[error("value {value} is outside the support of the {distribution} distribution")]
    OutOfSupport { distribution: &'static str, value: f64 },

    /// A closed form was evaluated at a pole or log singularity.
    #[error("singularity: {0}")]
    Singularity(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A serialized artifact does not match the expected layout.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
