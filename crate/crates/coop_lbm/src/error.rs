//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by matrix ingestion, model fitting and the metric suite.
#[derive(Error, Debug)]
pub enum Error {
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has no positive entry")]
    EmptyMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("AUC needs both a positive and a negative example")]
    SingleClass,

    #[error("network has no edges")]
    NoEdges,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("document error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
