use thiserror::Error;

use crate::geometry::GeometryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("uniform sampling requires a box-shaped set")]
    UnsupportedSetShape,

    #[error("learning rate {mu} outside (0, {upper})")]
    LearningRateOutOfRange { mu: f64, upper: f64 },

    #[error("model falsified at step {step}: set estimate became empty")]
    ModelFalsified { step: usize },

    #[error("class-K rate {0} outside (0, 1)")]
    InvalidRate(f64),

    #[error("true parameter required but not provided")]
    OracleUnavailable,

    #[error("safe input halfspace requires an affine barrier")]
    NonAffineBarrier,

    #[error("safety filter infeasible at step {step}: best achievable margin {best_margin:e}")]
    FilterInfeasible { step: usize, best_margin: f64 },

    #[error("state left the admissible box at step {step}: {state:?}")]
    StateOutOfBounds { step: usize, state: Vec<f64> },

    #[error("estimator at step {step} needs the latest transition")]
    MissingTransition { step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("seed {seed}: {source}")]
    Seed { seed: u64, source: Box<Error> },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Attach the step index to errors raised inside a closed loop.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::ModelFalsified { .. } => Error::ModelFalsified { step },
            Error::FilterInfeasible { best_margin, .. } => {
                Error::FilterInfeasible { step, best_margin }
            }
            other => other,
        }
    }

    /// True for the errors that signal violated standing assumptions
    /// (empty safe input set or empty parameter set).
    pub fn is_assumption_violation(&self) -> bool {
        match self {
            Error::ModelFalsified { .. } | Error::FilterInfeasible { .. } => true,
            Error::Seed { source, .. } => source.is_assumption_violation(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
