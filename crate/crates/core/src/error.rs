use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged{}: {detail}", epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default())]
    TrainingDiverged { epoch: Option<usize>, detail: String },

    #[error("degenerate normalization range: every training value equals {0}")]
    DegenerateRange(f64),

    #[error("ingestion failed: {malformed} of {total} rows malformed (limit 10%)")]
    IngestionFailed {
        malformed: usize,
        total: usize,
        report: crate::data::IngestReport,
    },

    #[error("normalization fingerprint mismatch: model {model}, dataset {dataset}")]
    FingerprintMismatch { model: String, dataset: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
