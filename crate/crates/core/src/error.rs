//! Error type shared by every module in the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by grid construction, layer evaluation, file I/O and the
/// alignment engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A grid was requested with a zero dimension.
    #[error("grid dimensions must be positive, got {height}x{width}x{channels}")]
    EmptyGrid {
        height: usize,
        width: usize,
        channels: usize,
    },

    /// A grid constructor was handed a non-finite value.
    #[error("non-finite value at element {index} of grid data")]
    NonFinite { index: usize },

    /// Two grids (or a grid and an expectation) disagree in shape.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A parameter violated its domain (e.g. non-positive scale).
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    /// A 3D point is too close to the camera plane to project.
    #[error("depth singularity: point ({u}, {v}, {w}) has |w| < {epsilon}")]
    DepthSingularity {
        u: f64,
        v: f64,
        w: f64,
        epsilon: f64,
    },

    /// A depth value outside (0, inf) was passed to a scalar path.
    #[error("invalid depth {0}: must be positive and finite")]
    InvalidDepth(f64),

    /// A file failed to parse; `offset` is the byte position of the failure.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Problem or config construction failed.
    #[error("configuration error: {0}")]
    Config(String),

    /// A synthetic pose left too little image overlap to be useful.
    #[error("insufficient overlap: {0}")]
    InsufficientOverlap(String),

    /// Underlying filesystem failure, annotated with the path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: String, actual: String) -> Self {
        Error::ShapeMismatch {
            context,
            expected,
            actual,
        }
    }
}
