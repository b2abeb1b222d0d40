use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the fairing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point has non-positive depth {depth:e} in camera")]
    DepthNonPositive { depth: f64 },

    #[error("degenerate projection (signed area {area:e})")]
    DegenerateProjection { area: f64 },

    #[error("projected vertex ({u:.2}, {v:.2}) outside image bounds")]
    OutOfBounds { u: f64, v: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid camera view: {0}")]
    InvalidView(String),

    #[error("need at least one view to build a basis")]
    InsufficientViews,

    #[error("basis dimension {k} exceeds number of views {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("cell mask mismatch (size {expected} vs {found})")]
    MaskMismatch { expected: usize, found: usize },

    #[error("robust scale must be positive and finite, got {0}")]
    NonPositiveSigma(f64),

    #[error("cannot estimate scale from an empty residual set")]
    EmptyResiduals,

    #[error("no cell pixels contribute to the vertex")]
    NoObservations,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DepthNonPositive { .. } => "depth_non_positive",
            Error::DegenerateProjection { .. } => "degenerate_projection",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::InvalidView(_) => "invalid_view",
            Error::InsufficientViews => "insufficient_views",
            Error::KTooLarge { .. } => "k_too_large",
            Error::MaskMismatch { .. } => "mask_mismatch",
            Error::NonPositiveSigma(_) => "non_positive_sigma",
            Error::EmptyResiduals => "empty_residuals",
            Error::NoObservations => "no_observations",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Io { .. } => "io",
        }
    }
}
