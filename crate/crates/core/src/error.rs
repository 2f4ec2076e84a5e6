use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("time step h = {h} exceeds the admissible maximum {h_max}")]
    InfeasibleTimestep { h: f64, h_max: f64 },

    #[error("sector {sector} is empty at node {node}")]
    EmptySector { node: usize, sector: String },

    #[error("non-finite value {value} at node {node} (sector {sector}, control {control:?})")]
    NonFinite {
        node: usize,
        sector: String,
        value: f64,
        control: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("failed to parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
