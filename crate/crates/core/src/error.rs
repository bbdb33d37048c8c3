use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("incompatible feature block order: model has {found:?}, expected {expected:?}")]
    BlockOrder { expected: String, found: String },

    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("missing file referenced by dataset index: {0}")]
    MissingFile(PathBuf),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("pose outside renderable frustum: {0}")]
    Frustum(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
