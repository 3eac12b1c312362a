use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("test function lacks {0}")]
    MissingDerivative(&'static str),

    #[error("diffusion gradient unavailable")]
    DiffusionGradientUnavailable,

    #[error("diffusion matrix not positive definite at y = {point:?} (Σ1 violated)")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("not integrable at working precision: {0}")]
    NotIntegrable(String),

    #[error("quadrature did not converge (estimated tail mass {tail_mass:e})")]
    QuadratureNonConvergence { tail_mass: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("table sampling supports dimension <= 2 (got {0}); use the Gaussian (quadratic) family")]
    SamplingDimension(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path blow-up at step {step} (|state| exceeded {guard:e})")]
    PathBlowUp { step: usize, guard: f64 },

    #[error("truncation radius too small: mass deficit {deficit:e} exceeds {tolerance:e}")]
    MassDeficit { deficit: f64, tolerance: f64 },

    #[error("linear solve failed after {iterations} iterations (residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("decay data contains no positive estimates")]
    EmptyDecay,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// `true` for errors caused by invalid input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::Precondition(_)
                | Error::MissingDerivative(_)
                | Error::SamplingDimension(_)
                | Error::Json(_)
        )
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
