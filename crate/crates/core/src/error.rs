use std::io;

use thiserror::Error;

/// Errors produced by containers, geometry builders and executors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid batch offsets: {0}")]
    Offset(String),
    #[error("non-finite value at {what} index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("voxel size must be positive and finite, got {0}")]
    Voxel(f64),
    #[error("triplet {index} out of range: {detail}")]
    Index { index: usize, detail: String },
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("invalid operator state: {0}")]
    State(String),
    #[error("invalid execution config: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
