use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice parameters: {0}")]
    InvalidParams(String),

    #[error("gradient/Hessian undefined at k = (0,0) in wave mode")]
    SingularOrigin,

    #[error("complex argument lies on the square-root branch cut (gamma^2 = {re} + {im}i)")]
    BranchCut { re: f64, im: f64 },

    #[error("point is not on the degenerate curve (normalized residual {residual:.3e})")]
    NotOnCurve { residual: f64 },

    #[error("root finder did not converge: {0}")]
    NonConvergence(String),

    #[error("Newton polyhedron has empty support")]
    EmptySupport,

    #[error("curve tracing failed: {0}")]
    TracingFailure(String),

    #[error("quadrature needs N = {needed} but the cap is {cap}")]
    ResolutionCap { needed: usize, cap: usize },

    #[error("time step {dt} violates the stability limit {limit}")]
    Stability { dt: f64, limit: f64 },

    #[error("need at least {needed} dyadic windows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("sample at x = ({x1}, {x2}) is not in the exterior region")]
    RegionViolation { x1: i64, x2: i64 },

    #[error("truncation radius too small: boundary kernel value {boundary:.3e}")]
    TruncationTooSmall { boundary: f64 },

    #[error("bad field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
