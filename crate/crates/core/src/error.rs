use thiserror::Error;

use crate::lp::LpError;
use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("market failed validation: {}", list(.0))]
    Validation(Vec<Violation>),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("spouses {0} and {1} live in different regions")]
    InconsistentRegion(String, String),
    #[error("market {0} has no matched couple")]
    EmptyMarket(String),
    #[error("model error: {0}")]
    ModelError(String),
    #[error("adjustment error: {0}")]
    AdjustmentError(String),
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
