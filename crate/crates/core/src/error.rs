use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("input is not valid UTF-8 (near byte {byte_offset})")]
    NonUtf8 { byte_offset: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training labels contain a single class; both 0 and 1 are required")]
    SingleClass,

    #[error(
        "not enough examples for title {title:?}: requested {requested_pos} positives / \
         {requested_neg} negatives, available {available_pos} / {available_neg}"
    )]
    InsufficientSamples {
        title: String,
        requested_pos: usize,
        requested_neg: usize,
        available_pos: usize,
        available_neg: usize,
    },

    #[error("vocabulary is empty after applying min_doc_freq = {min_doc_freq}")]
    EmptyVocabulary { min_doc_freq: usize },

    #[error("config key {key:?}: {message}")]
    Config { key: String, message: String },

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
