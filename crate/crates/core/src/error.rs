use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("duplicate app id `{0}`")]
    DuplicateApp(String),

    #[error("unknown app `{0}`")]
    UnknownApp(String),

    #[error("unknown app class `{0}`")]
    UnknownClass(String),

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("{what} {value} outside ({lower}, {upper}]")]
    OutOfBounds {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("no eligible apps")]
    NoEligibleApps,

    #[error("history out of order: slot {slot} follows slot {previous}")]
    UnorderedHistory { previous: u64, slot: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
