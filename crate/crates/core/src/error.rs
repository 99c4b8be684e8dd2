//! Library-wide error type.

use std::path::PathBuf;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },

    #[error("attribute `{name}` has {found} entries for {expected} points")]
    AttributeLength {
        name: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate range: every value equals {value}")]
    DegenerateRange { value: f64 },

    #[error("zero variance; z-scores are undefined")]
    ZeroVariance,

    #[error("sample points are collinear within tolerance; plane is undefined")]
    CollinearPoints,

    #[error("need at least {need} points, found {found}")]
    InsufficientPoints { need: usize, found: usize },

    #[error("no plane reached {min_inliers} inliers (best consensus: {best})")]
    NoPlaneFound { min_inliers: usize, best: usize },

    #[error("ceiling altitude {ceiling} does not exceed floor altitude {floor}")]
    InvertedGeometry { floor: f64, ceiling: f64 },

    #[error("labels contain fewer than two distinct classes")]
    SingleClass,

    #[error("cloud carries no labels")]
    MissingLabels,

    #[error("unknown surface id {0}")]
    UnknownSurface(u32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("truncated input at byte offset {offset}: expected {expected}")]
    Truncated { offset: usize, expected: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("shape mismatch for {subject}: expected {expected}, found {found}")]
    ShapeMismatch {
        subject: String,
        expected: String,
        found: String,
    },
}

impl Error {
    /// Shorthand for an [`Error::InvalidParameter`] with a formatted reason.
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps an I/O error together with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
