use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("problem dump is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}
