use thiserror::Error;

use crate::complex::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid complex: {0}")]
    InvalidComplex(ValidationReport),

    #[error("complex already has {0} triangles")]
    AlreadyHasTriangles(usize),

    #[error("no attributes on dimension {dim}")]
    MissingAttributes { dim: usize },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("eigensolver failed on {what} (residual norm {residual:e})")]
    Eigen { what: String, residual: f64 },

    #[error("eigenvalue {0} below zero tolerance")]
    NegativeEigenvalue(f64),

    #[error("matrix not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("model has not been fitted")]
    NotFitted,

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("unsupported configuration: {0}")]
    Config(String),

    #[error("dataset record {record}: {message}")]
    Record { record: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}
