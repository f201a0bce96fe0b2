use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field contains a non-finite value at index {index}")]
    InvalidField { index: usize },

    #[error("spectrum is not Hermitian: defect {defect:e} exceeds {tolerance:e}")]
    Asymmetry { defect: f64, tolerance: f64 },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("unsupported exponent {num}/{den}: the denominator must be odd")]
    UnsupportedExponent { num: i64, den: i64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("solution diverged at step {step}")]
    Diverged { step: usize },

    #[error("degenerate minimum: Hessian determinant {det:e} relative to norm {norm:e}")]
    DegenerateMinimum { det: f64, norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no blow-up predicted for n = {0} < 4/3")]
    NoBlowUpPredicted(f64),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
