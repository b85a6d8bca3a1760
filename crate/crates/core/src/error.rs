use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not hermitian: max |m - m^dagger| = {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("trace is {trace} (expected 1, defect {defect:e})")]
    TraceNotOne { trace: f64, defect: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("state is not pseudo-pure: spectrum {spectrum:?}")]
    NotPseudoPure { spectrum: Vec<f64> },

    #[error("invalid control system: {0}")]
    InvalidSystem(String),

    #[error("point is not a fixed point of the feedback flow: |f| = {residual:e}")]
    NotFixedPoint { residual: f64 },

    #[error("linearization leaks into the Cartan block: max coupling {leak:e}")]
    LeakageIntoCartan { leak: f64 },

    #[error("target is not stationary under the drift: defect {defect:e}")]
    NotStationary { defect: f64 },

    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),

    #[error("step at t = {time} rejected after {halvings} halvings: V increased by {increase:e}")]
    StepRejected {
        time: f64,
        halvings: u32,
        increase: f64,
    },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical integration itself, as opposed to
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::StepRejected { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
