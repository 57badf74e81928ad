use std::path::PathBuf;

use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum MbfdError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unreadable container {path}: {reason}")]
    BadContainer { path: PathBuf, reason: String },

    #[error("channel {channel:?} absent in {path}")]
    ChannelAbsent { path: PathBuf, channel: String },

    #[error("non-finite sample values in {0}")]
    NonFinite(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("feature undefined: {0}")]
    FeatureUndefined(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("unknown label index {0}")]
    UnknownLabel(usize),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for MbfdError {
    fn from(e: serde_json::Error) -> Self {
        MbfdError::Serde(e.to_string())
    }
}
