use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was applied to an object in the wrong state
    /// (e.g. fine-tuning from an already fine-tuned checkpoint).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A file did not start with the expected magic bytes.
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    /// A file declared a format version this build does not understand.
    #[error("unsupported format version {found} (this build supports up to {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    /// A file ended before its declared payload was complete.
    #[error("truncated file while reading {0}")]
    Truncated(String),

    /// A file parsed but its contents are inconsistent.
    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::Malformed(msg.into())
    }
}
