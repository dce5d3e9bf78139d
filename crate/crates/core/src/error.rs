use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (shape mismatch,
    /// non-finite value, mismatched Q-formats, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value is unusable (zero clock, empty taps, zero budget, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A weights/dataset file is malformed.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
