use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// Adiabatic level labels could not be followed unambiguously.
    #[error("ambiguous level label {label} at {field_gauss} G")]
    LabelAmbiguity { label: String, field_gauss: f64 },

    /// An integrator left its accuracy envelope.
    #[error("step-size error: {0}")]
    StepSize(String),

    /// Observable moved when the Fock cutoff was raised.
    #[error("Fock truncation guard failed: shift {shift:.3e} > {tolerance:.1e} going from n_max={n_max} to n_max={}", n_max + 2)]
    Truncation {
        n_max: usize,
        shift: f64,
        tolerance: f64,
    },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
