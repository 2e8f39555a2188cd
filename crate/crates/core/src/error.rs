use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("case file parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid case: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum HealthError {
    #[error("health index {0} outside [0, 1]")]
    Domain(f64),
    #[error("unknown fault case `{0}`")]
    UnknownFault(String),
    #[error("invalid fault table: {0}")]
    InvalidTable(String),
    #[error("fault table JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("W is not rank one (lambda2/lambda1 = {ratio:.3e})")]
    Inexact { ratio: f64 },
    #[error("W dimension {0} is not 2n")]
    Dimension(usize),
}

#[derive(Debug, Error)]
pub enum HfopfError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Health(#[from] HealthError),
    #[error(transparent)]
    Solver(#[from] hfopf_conic::ConicError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("{0}")]
    Request(String),
}
