use std::path::Path;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file failed to parse or violated its format contract.
    /// `line` is 1-based; 0 means the error is not tied to a line.
    #[error("{file}:{line}: {msg}")]
    Malformed {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument or precondition violation (empty dataset, bad k, ...).
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn malformed(file: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            file: file.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
