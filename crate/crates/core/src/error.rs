use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("pattern length {pattern} exceeds text length {text}")]
    InvalidSize { text: usize, pattern: usize },

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("alphabet size {sigma} exceeds the configured cap {cap}")]
    AlphabetTooLarge { sigma: u32, cap: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_sizes(text: usize, pattern: usize) -> Result<()> {
    if pattern > text {
        return Err(Error::InvalidSize { text, pattern });
    }
    if pattern == 0 {
        return Err(Error::InvalidInstance("pattern must be non-empty".into()));
    }
    Ok(())
}
