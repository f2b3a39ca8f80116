use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by training, indexing, querying and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need {needed} distinct rows, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("insufficient rank: need {needed} principal directions, data has rank {rank}")]
    InsufficientRank { needed: usize, rank: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty frame: no features to aggregate")]
    EmptyFrame,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("codebook mismatch: index was built with codebook {index_codebook} (format v{index_version}), got codebook {given_codebook} (format v{given_version})")]
    CodebookMismatch {
        index_codebook: String,
        index_version: u16,
        given_codebook: String,
        given_version: u16,
    },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches a file path to an error.
    pub fn at(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable category, used by the command-line tool.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::InsufficientRank { .. } => "insufficient-rank",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::EmptyFrame => "empty-frame",
            Error::EmptyInput(_) => "empty-input",
            Error::BadMagic { .. } => "bad-magic",
            Error::UnsupportedVersion { .. } => "unsupported-version",
            Error::CodebookMismatch { .. } => "codebook-mismatch",
            Error::Malformed(_) => "malformed",
            Error::File { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
