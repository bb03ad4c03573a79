//! Error type shared across the crate.

/// Unified error for every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector, matrix, or partition had the wrong size for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// An argument was outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index exceeded the number of available entries.
    #[error("index {index} out of range for {what} of length {len}")]
    Range {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// An operation was invoked on a value in the wrong state
    /// (e.g. reading cached gradients before a backward pass).
    #[error("invalid state: {0}")]
    State(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Malformed bytes or text fed to one of the decoders.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A parallel local solve failed; carries the subdomain index.
    #[error("subdomain {subdomain} failed: {source}")]
    Subdomain {
        subdomain: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn in_subdomain(self, subdomain: usize) -> Self {
        Error::Subdomain {
            subdomain,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
