use thiserror::Error;

/// Failures surfaced to the shell. Each kind has its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config files or ids.
    #[error("{0}")]
    Usage(String),

    /// Training produced non-finite values. Outputs written so far are kept.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// A checkpoint does not fit the requested scenario or is malformed.
    #[error("{0}")]
    Schema(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Schema(_) => 4,
        }
    }
}

impl From<bargain::error::Error> for CliError {
    fn from(e: bargain::error::Error) -> Self {
        use bargain::error::Error as E;
        match e {
            E::Schema(_) | E::Dimension { .. } => CliError::Schema(e.to_string()),
            E::Contract(_) => CliError::Usage(e.to_string()),
            E::NonFinite(_) => CliError::Diverged(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
