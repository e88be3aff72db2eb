use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] purestat::Error),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("dimension {0} exceeds the memory guard of {max}", max = crate::config::MAX_TOTAL_DIM)]
    DimsTooLarge(usize),

    #[error("missing result files in {0}")]
    MissingResults(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
