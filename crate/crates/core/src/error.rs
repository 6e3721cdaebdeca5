//! Error type shared by the whole crate.
//!
//! Three failure classes matter to callers:
//! * `Parse` — a file is syntactically malformed (reported with path and
//!   1-based line number so the offending row can be fixed).
//! * `Integrity` — the file parsed but violates a cross-record rule
//!   (duplicate ids, dangling references, a null-document row mixed with
//!   ranked rows, scores out of order).
//! * `Contract` — an operation was called on inputs outside its domain
//!   (empty logit vector, average precision of a question with no relevant
//!   passages, NaN scores).
//!
//! The batch CLI maps all of these to exit code 1; usage problems exit 2.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        /// 1-based line number (0 when the error is not tied to a line).
        line: usize,
        msg: String,
    },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    pub fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
