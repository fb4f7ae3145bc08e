use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell index {index} out of bounds for {width}x{height} grid")]
    OutOfBounds {
        index: usize,
        width: usize,
        height: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed map file at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("robot pose ({x:.3}, {y:.3}) lies inside a wall or outside the plan")]
    PoseInWall { x: f64, y: f64 },

    #[error("filter divergence: every particle weight underflowed at step {step}")]
    FilterDivergence { step: usize },

    #[error("exploration stopped after {steps} steps without searching {percent:.0}% of reachable cells")]
    CoverageNotReached { steps: usize, percent: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}; last good checkpoint: {last_good:?}")]
    Diverged {
        epoch: usize,
        last_good: Option<PathBuf>,
    },

    #[error("checkpoint architecture hash {found:#018x} does not match model {expected:#018x}")]
    ArchitectureMismatch { expected: u64, found: u64 },

    #[error("missing checkpoint(s): {}", .0.join(", "))]
    MissingCheckpoints(Vec<String>),

    #[error("searched region {width}x{height} exceeds the {field}x{field} network field; multi-crop tiling is not supported")]
    RegionTooLarge {
        width: usize,
        height: usize,
        field: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
