use thiserror::Error;

use crate::registration::RegistrationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("preprocessing removed every point")]
    PreprocessingDegenerate,

    #[error("degenerate features: {0}")]
    DegenerateFeature(String),

    #[error("insufficient correspondences: need at least 3 keypoints, have {scan} scan / {reference} reference")]
    InsufficientCorrespondences { scan: usize, reference: usize },

    #[error("ICP diverged: no correspondences within {max_dist} m at iteration {iteration}")]
    Divergence { iteration: usize, max_dist: f64 },

    /// Outer registration loop ran out; carries the best estimate seen, if any passed the gate.
    #[error("registration failed after {loops} outer loops (best fitness {best_fitness:e})")]
    RegistrationFailed {
        loops: usize,
        best_fitness: f64,
        best: Option<Box<RegistrationResult>>,
    },

    #[error("IK did not converge after {iterations} iterations (residual {position_error:e} m, {orientation_error:e} rad)")]
    UnreachableTarget {
        iterations: usize,
        position_error: f64,
        orientation_error: f64,
    },

    #[error("joint {joint} at {value} rad violates limits [{min}, {max}]")]
    LimitViolation {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("tip ray is parallel to the hole plane")]
    DegenerateApproach,

    #[error("waypoint {index}: {source}")]
    Waypoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
