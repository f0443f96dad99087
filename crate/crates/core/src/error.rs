use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context}: expected {expected:?}, got {found:?}")]
    DimensionMismatch {
        context: String,
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("{path}: dimension mismatch, expected {expected:?} (w, h, c), got {found:?}")]
    FileDimensionMismatch {
        path: PathBuf,
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("invalid image data: {0}")]
    InvalidImage(String),

    #[error("mosaic dimensions must be even, got {width}x{height}")]
    OddMosaic { width: usize, height: usize },

    #[error("angle {value} rad is outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("DoLP {dolp} exceeds the diffuse model supremum {d_max} for this material")]
    Saturated { dolp: f64, d_max: f64 },

    #[error("degenerate geometry: alpha_plus = {alpha_plus} rad")]
    Degenerate { alpha_plus: f64 },

    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    WindowTooLarge {
        width: usize,
        height: usize,
        window: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit diverged in phase {phase} at iteration {iteration}: loss {loss} > {limit}")]
    Diverged {
        phase: usize,
        iteration: usize,
        loss: f64,
        limit: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Decode {
            path: path.into(),
            message: message.into(),
        }
    }
}
