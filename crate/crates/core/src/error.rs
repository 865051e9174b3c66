use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The channel measurement failed with certainty; the success branch is gone.
    #[error("measurement {k} has vanishing success probability ({p:e})")]
    ZeroProbability { k: usize, p: f64 },

    #[error("no fidelity peak found in the trace")]
    NoPeak,

    #[error("integrator step size underflow at t = {t} (h = {step:e})")]
    IntegratorFailure { t: f64, step: f64 },

    #[error("full Hilbert-space oracle limited to N <= 8, got N = {0}")]
    OracleTooLarge(usize),

    #[error("state invariant violated: {what} = {value:e}")]
    InvariantViolation { what: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
