use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("out of domain: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for failures caused by unreadable or malformed input files, as
    /// opposed to well-formed input that violates a model constraint.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io { .. })
    }
}
