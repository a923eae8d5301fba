use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, FredError>;

/// Every failure mode surfaced by the library.
///
/// [`FredError::category`] gives a stable short name used by the CLI
/// diagnostics and by tests that assert on the failure kind.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FredError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {what} (worst residual {residual:.3e})")]
    PreconditionViolation { what: String, residual: f64 },

    #[error("kernel evaluation failed at (y = {y}, z = {z}): {reason}")]
    Evaluation { y: f64, z: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("wrong decomposition: {0}")]
    WrongDecomposition(String),

    #[error(
        "defective eigenstructure suspected (condition estimate {condition:.3e}); use the jordanforms module"
    )]
    DefectiveSuspected { condition: f64 },

    #[error("no spectrum: all eigenvalues are zero")]
    NoSpectrum,

    #[error("ambiguous eigenvalue clustering: {0}")]
    Clustering(String),

    #[error("ill-conditioned Jordan chain (residual {residual:.3e}, limit {limit:.3e})")]
    IllConditionedChain { residual: f64, limit: f64 },

    #[error("unsupported asymptotic profile: {0}")]
    UnsupportedProfile(String),

    #[error(
        "lambda = {lambda} is too close to the Fredholm eigenvalue {nearest} (relative gap {gap:.3e}, condition {condition:.3e})"
    )]
    EigenvalueProximity {
        lambda: Complex64,
        nearest: Complex64,
        gap: f64,
        condition: f64,
    },

    #[error("lambda = {lambda} is a pole (Fredholm eigenvalue {eigenvalue})")]
    Pole {
        lambda: Complex64,
        eigenvalue: Complex64,
    },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("starting vector error: {0}")]
    StartingVector(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl FredError {
    pub fn category(&self) -> &'static str {
        match self {
            FredError::InvalidArgument(_) => "invalid-argument",
            FredError::PreconditionViolation { .. } => "precondition-violation",
            FredError::Evaluation { .. } => "evaluation-error",
            FredError::Unsupported(_) => "unsupported",
            FredError::DivisionByZero(_) => "division-by-zero",
            FredError::WrongDecomposition(_) => "wrong-decomposition",
            FredError::DefectiveSuspected { .. } => "defective-suspected",
            FredError::NoSpectrum => "no-spectrum",
            FredError::Clustering(_) => "clustering-error",
            FredError::IllConditionedChain { .. } => "ill-conditioned-chain",
            FredError::UnsupportedProfile(_) => "unsupported-profile",
            FredError::EigenvalueProximity { .. } => "eigenvalue-proximity",
            FredError::Pole { .. } => "pole",
            FredError::NoSolution(_) => "no-solution",
            FredError::StartingVector(_) => "starting-vector",
            FredError::Convergence(_) => "convergence",
            FredError::Io(_) => "io-error",
        }
    }
}

impl From<std::io::Error> for FredError {
    fn from(e: std::io::Error) -> Self {
        FredError::Io(e.to_string())
    }
}

impl From<csv::Error> for FredError {
    fn from(e: csv::Error) -> Self {
        FredError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FredError {
    fn from(e: serde_json::Error) -> Self {
        FredError::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> FredError {
    FredError::InvalidArgument(msg.into())
}
