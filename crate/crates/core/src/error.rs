use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum KwsError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("missing class directory for keyword `{0}`")]
    MissingClass(String),

    #[error("class `{0}` has no WAV files")]
    EmptyClass(String),

    #[error("insufficient data: {rows} rows for {bins} bins")]
    InsufficientData { rows: usize, bins: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("model/data mismatch: {0}")]
    ModelDataMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl KwsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KwsError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage error, 2 data error, 3 internal error.
    pub fn exit_code(&self) -> i32 {
        match self {
            KwsError::InvalidConfig(_) => 1,
            KwsError::Parse(_)
            | KwsError::UnsupportedFormat(_)
            | KwsError::MissingClass(_)
            | KwsError::EmptyClass(_)
            | KwsError::InsufficientData { .. }
            | KwsError::Dimension { .. }
            | KwsError::ModelVersion(_)
            | KwsError::StaleCache(_)
            | KwsError::ModelDataMismatch(_) => 2,
            KwsError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            KwsError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, KwsError>;
