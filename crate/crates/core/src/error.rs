use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported ambient dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("resolution {resolution} too small for band limit {band} (need at least {required})")]
    ResolutionTooSmall {
        resolution: usize,
        band: usize,
        required: usize,
    },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("field is not origin-symmetric (largest odd coefficient {odd:.3e})")]
    NotSymmetric { odd: f64 },

    #[error("support function is not positive (min value {min:.3e})")]
    PositivityViolation { min: f64 },

    #[error("convexity margin {margin:.3e} is below the threshold {threshold:.1e}")]
    ConvexityViolation { margin: f64, threshold: f64 },

    #[error("degenerate body: {0}")]
    DegenerateBody(String),

    #[error("pencil assembly asymmetry {residual:.3e}")]
    AssemblyAsymmetry { residual: f64 },

    #[error("eigensolver failure: {0}")]
    EigensolveFailure(String),

    #[error("even/full third eigenvalue mismatch: even {even}, full {full}")]
    CrossCheckMismatch { even: f64, full: f64 },

    #[error("spectral structure violated: {check} (residual {residual:.3e})")]
    StructureViolation { check: String, residual: f64 },

    #[error("perturbation field is identically zero")]
    ZeroField,

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("Jacobian is singular")]
    JacobianSingular,

    #[error("continuation stalled at t = {t} (step {step:.1e})")]
    ContinuationStall { t: f64, step: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
