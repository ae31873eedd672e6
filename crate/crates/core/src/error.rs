use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("feasible set is empty")]
    InfeasibleSet,
    #[error("degenerate halfspace with zero normal and offset {offset}")]
    DegenerateCut { offset: f64 },
    #[error("intersection of the two halfspaces is empty")]
    EmptyIntersection,
    #[error("inner solver hit {iterations} iterations (residual {residual:e})")]
    MaxInnerIterationsExceeded { iterations: usize, residual: f64 },
    #[error("objective or iterate became non-finite")]
    NonFiniteObjective,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("Lipschitz-type constants unavailable: {0}")]
    UnknownConstants(String),
    #[error("parameter violation: {0}")]
    ParameterViolation(String),
    #[error("cut is empty: zero normal with offset {value:e}")]
    InfeasibleCut { value: f64 },
    #[error("linesearch failed after {trials} trials (last value {last_value:e})")]
    LinesearchFailed { trials: usize, last_value: f64 },
    #[error("linesearch needs distinct points")]
    LinesearchDegenerate,
    #[error("instance incompatible with algorithm: {0}")]
    IncompatibleInstance(String),
}
