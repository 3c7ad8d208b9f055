use std::io;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric (relative skew {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is numerically zero")]
    AllZero,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("odd length {0}: real/complex mapping needs an even length")]
    OddLength(usize),
    #[error("pilot set is empty")]
    EmptyPilotSet,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("convolutional aligner needs a (channels, height, width) layout")]
    LayoutMissing,
    #[error("reference encodings are degenerate (all-zero rows)")]
    DegenerateReferences,
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated file")]
    TruncatedFile,
    #[error("non-finite value in tensor payload")]
    NonFiniteValue,
    #[error("malformed file: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
