use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("split: {0}")]
    Split(String),
    #[error("metric: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, DataError>;
