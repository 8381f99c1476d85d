use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called outside its documented domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    /// A binary or JSON file did not match its expected layout.
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format { what, detail: detail.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
