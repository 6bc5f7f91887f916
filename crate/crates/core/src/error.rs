use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension N = {0} (sphere discretization exists for N = 3 only)")]
    UnsupportedDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("discretization failure: {0}")]
    DiscretizationFailure(String),

    #[error("positivity violation: mu_1 = {mu1:.6e} does not exceed -((N-2)/2)^2 = {bound:.6e}")]
    PositivityViolation { mu1: f64, bound: f64 },

    #[error("resonant indicial roots (sigma+ = sigma-) are not supported")]
    UnsupportedResonance,

    #[error("forcing is not integrable against s^(1-sigma-) near 0 (tail exponent {0:.4})")]
    NonintegrableForcing(f64),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("Picard iteration did not converge after {iterations} sweeps (last change {last_change:.3e})")]
    Nonconvergence { iterations: usize, last_change: f64 },

    #[error("degenerate height: H({radius:.4e}) = {value:.4e} is not positive")]
    DegenerateHeight { radius: f64, value: f64 },

    #[error("no limit detected: fit error {fit_error:.3e} exceeds {threshold:.3e}")]
    NoLimitDetected { fit_error: f64, threshold: f64 },

    #[error("invalid exponent: 2*gamma + N - 2 = {0:.4e} must be positive")]
    InvalidExponent(f64),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 positivity, 3 nonconvergence, 4 no limit, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PositivityViolation { .. } => 2,
            Error::Nonconvergence { .. } => 3,
            Error::NoLimitDetected { .. } => 4,
            _ => 1,
        }
    }
}
