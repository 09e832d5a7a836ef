use std::path::PathBuf;

/// Errors produced by loading, preprocessing, fitting and serialization.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no records")]
    EmptyFile { path: PathBuf },

    #[error("{path}:{line}: record has {got} values, expected {expected}")]
    RaggedRecord {
        path: PathBuf,
        line: usize,
        got: usize,
        expected: usize,
    },

    #[error("{path}:{line}: cannot parse {what} token `{token}`")]
    BadToken {
        path: PathBuf,
        line: usize,
        what: &'static str,
        token: String,
    },

    #[error("series too short: length {len}, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("label `{token}` not present in the training split")]
    UnknownLabel { token: String },

    #[error("dimension mismatch: {context} (got {got}, expected {expected})")]
    DimensionMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unknown group id {0}")]
    UnknownGroup(usize),

    #[error("empty group selection")]
    EmptySelection,

    #[error("kernel does not fit the series (effective span {span}, padded length {padded})")]
    KernelTooLarge { span: usize, padded: usize },

    #[error("model bundle is malformed: {0}")]
    BadBundle(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
