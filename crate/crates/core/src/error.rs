use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("ticker `{0}` has no metadata")]
    MissingMetadata(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("lag design: {0}")]
    Design(String),

    #[error("degenerate firm at index {index}: {reason}")]
    DegenerateFirm { index: usize, reason: String },

    #[error("firm order mismatch between tables")]
    FirmOrderMismatch,

    #[error("no snapshot stored for {0}")]
    SnapshotNotFound(NaiveDate),

    #[error("checksum mismatch for {0}")]
    Checksum(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::MissingColumn(_)
                | Error::MissingMetadata(_)
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Design(_)
                | Error::FirmOrderMismatch
        )
    }
}
