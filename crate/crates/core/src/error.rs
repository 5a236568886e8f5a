use thiserror::Error;

/// Errors raised while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// The scenario or an argument is inconsistent or out of range.
    #[error("configuration error: {0}")]
    Config(String),
    /// A simulation invariant was violated. This is a bug in the simulator,
    /// the message carries a dump of the relevant state.
    #[error("invariant fault: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Invariant(_) => 3,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("scenario: {e}"))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
