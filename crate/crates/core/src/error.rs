use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("non-finite coordinate")]
    NonFinite,

    #[error("log map undefined for antipodal points")]
    AntipodalPair,

    #[error("tangent vector is not orthogonal to the base point (inner product {inner})")]
    NonOrthogonalTangent { inner: f64 },

    #[error("weighted sum of scoring vectors vanishes")]
    DegenerateMean,

    #[error("voters agree on every pair of the batch")]
    NoContestedPairs,

    #[error("batch is degenerate: all items coincide")]
    DegenerateBatch,

    #[error("logistic fit is degenerate (coefficient norm {norm:e})")]
    DegenerateFit { norm: f64 },

    #[error("no coordinate pair keeps every voter non-degenerate")]
    NoValidPair,

    #[error("no subsample passed the heterogeneity filter after {tries} tries")]
    FilterExhausted { tries: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
