use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("lattice mismatch {percent:.3}% exceeds tolerance {tolerance_percent:.3}%")]
    LatticeMismatch {
        percent: f64,
        tolerance_percent: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate k-path segment between nodes {0} and {1}")]
    DegenerateSegment(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("pseudopotential {element}: {message}")]
    Pseudo { element: String, message: String },

    #[error("UPF name {name:?}: mandatory field missing ({field})")]
    MandatoryField { name: String, field: &'static str },

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient bands: {bands} bands cannot hold {electrons} electrons")]
    InsufficientBands { bands: usize, electrons: f64 },

    #[error("charged cell (total charge {0}) requires the compensating-background flag")]
    ChargedCell(f64),

    #[error("total-energy routes disagree by {0:e} Ha")]
    EnergyConsistency(f64),

    #[error(
        "SCF diverging: energy rose for {0} consecutive iterations; try a smaller mixing_beta"
    )]
    ScfDiverging(usize),

    #[error("SCF did not converge in {0} iterations")]
    NotConverged(usize),

    #[error("density clamping affected {fraction:.4} of grid points (limit 0.01)")]
    ExcessiveClamping { fraction: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing prerequisite: no converged scf result for prefix {prefix:?} at {path}")]
    Dependency { prefix: String, path: PathBuf },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
