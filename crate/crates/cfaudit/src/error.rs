//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Schema violations: missing columns, duplicate names, bad declarations.
    #[error("schema error: {0}")]
    Schema(String),

    /// Cell-level parse failures that cannot be attributed to single rows.
    #[error("parse error: {0}")]
    Parse(String),

    /// Dataset-level violations: empty groups, undersized strata, layout mismatches.
    #[error("data error: {0}")]
    Data(String),

    /// Training failures: single-class labels, divergence, empty grids.
    #[error("model error: {0}")]
    Model(String),

    /// Counterfactual generation misuse (k < 1 and friends).
    #[error("generation error: {0}")]
    Generation(String),

    /// Metric preconditions (empty pools, n < 1).
    #[error("metric error: {0}")]
    Metric(String),

    /// Audit configuration problems.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
