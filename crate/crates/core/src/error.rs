use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {z} lies within {radius:e} of a pole")]
    PoleProximity { z: Complex64, radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trace {trace:e} too small to define the spin direction")]
    ChargeDegenerate { trace: f64 },

    #[error("poles {i} and {j} collide (distance {distance:e})")]
    Collision { i: usize, j: usize, distance: f64 },

    #[error("step size underflow at t={t} (h={h:e}); closest pole pair ({i},{j}) at distance {distance:e}")]
    StepUnderflow {
        t: f64,
        h: f64,
        i: usize,
        j: usize,
        distance: f64,
    },

    #[error("degenerate configuration: {what} (condition estimate {cond:e})")]
    DegenerateConfiguration { what: String, cond: f64 },

    #[error("degenerate velocity system (condition estimate {cond:e})")]
    DegenerateVelocity { cond: f64 },

    #[error("construction failed: {class} residual {residual:e} above tolerance {tol:e}")]
    ConstructionFailed {
        class: String,
        residual: f64,
        tol: f64,
    },

    #[error("strip condition violated: {0}")]
    StripViolation(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient decay: boundary magnitude {0:e}")]
    InsufficientDecay(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("resolution failure at t={t}: spectral tail fraction {tail:e}")]
    ResolutionFailure { t: f64, tail: f64 },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used for CLI exit records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PoleProximity { .. } => "pole-proximity",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::ChargeDegenerate { .. } => "charge-degenerate",
            Error::Collision { .. } => "collision",
            Error::StepUnderflow { .. } => "step-underflow",
            Error::DegenerateConfiguration { .. } => "degenerate-configuration",
            Error::DegenerateVelocity { .. } => "degenerate-velocity",
            Error::ConstructionFailed { .. } => "construction-failed",
            Error::StripViolation(_) => "strip-violation",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::InsufficientDecay(_) => "insufficient-decay",
            Error::Precondition(_) => "precondition",
            Error::ResolutionFailure { .. } => "resolution-failure",
            Error::ConstraintViolation(_) => "constraint-violation",
            Error::Quadrature(_) => "quadrature",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
