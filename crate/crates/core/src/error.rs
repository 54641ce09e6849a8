use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame too small: {0}")]
    FrameTooSmall(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("filter {filter_rows}x{filter_cols} does not fit in level {level_rows}x{level_cols}")]
    FilterTooLarge {
        filter_rows: usize,
        filter_cols: usize,
        level_rows: usize,
        level_cols: usize,
    },
    #[error("quadratic deformation coefficient must be positive, got {0}")]
    NonPositiveQuadratic(f64),
    #[error("pyramid level {0} is missing")]
    MissingLevel(usize),
    #[error("non-finite value: {0}")]
    NonFinite(f64),
    #[error("empty subset")]
    EmptySubset,
    #[error("empty subset candidate family")]
    EmptyFamily,
    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,
    #[error("no placement overlaps the initial box by the required amount")]
    NoValidInitialization,
    #[error("track lost")]
    TrackLost,
    #[error("search window lies outside the frame")]
    EmptySearchWindow,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid synthetic spec: {0}")]
    SpecInvalid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model validation failed: {0}")]
    Validation(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
