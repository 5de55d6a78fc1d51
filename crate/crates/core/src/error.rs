use thiserror::Error;

/// Errors raised across the geometry, flow and criticality layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tangent vector is not horizontal (|<p,u>| = {residual:e})")]
    NotHorizontal { residual: f64 },

    #[error("projective point is not unit norm (|p| = {norm})")]
    NotUnit { norm: f64 },

    #[error("operation unsupported on the {0} backend")]
    UnsupportedBackend(&'static str),

    #[error("lift has a single time sample; no time derivative available")]
    NoDerivative,

    #[error("velocity one-form is not exact: max |period| = {max_period:e} > {tol:e}")]
    NotExact { max_period: f64, tol: f64 },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("empty input")]
    EmptyInput,

    #[error("lift and Hamiltonian are inconsistent: edge deviation {deviation:e} > {tol:e}")]
    Inconsistent { deviation: f64, tol: f64 },

    #[error("Lagrangian defect {defect:e} exceeded {tol:e} at t = {time}; retry with more steps")]
    StepRejected { time: f64, defect: f64, tol: f64 },

    #[error("time profile has nonzero mean {mean:e}")]
    NonZeroMean { mean: f64 },

    #[error("tube radius {eps} exceeds mesh separation {separation}")]
    SeparationExceeded { eps: f64, separation: f64 },

    #[error("gradient evaluation failed: {0}")]
    Gradient(String),

    #[error("report self-check failed: {0}")]
    SelfCheck(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
