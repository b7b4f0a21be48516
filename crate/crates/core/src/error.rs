use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate grid: {0}")]
    InvalidGrid(String),
    #[error("field length {got} does not match grid layout ({expected} expected)")]
    SizeMismatch { expected: usize, got: usize },
    #[error("weight field has a negative entry at index {0}")]
    NegativeWeight(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "bump support [{lo}, {hi}] is not strictly inside the domain (-{half_width}, {half_width})"
    )]
    SupportOutsideDomain { lo: f64, hi: f64, half_width: f64 },
    #[error("non-positive pivot {pivot:e} at row {row} of the velocity system")]
    NonPositivePivot { row: usize, pivot: f64 },
    #[error("time step fell below dt_min = {dt_min:e} at t = {t}; Picard residual history {residuals:?}")]
    DtUnderflow {
        t: f64,
        dt_min: f64,
        residuals: Vec<f64>,
    },
    #[error("positivity violated at t = {t}: min J = {min_j:e}, min pi = {min_pi:e}")]
    PositivityViolation { t: f64, min_j: f64, min_pi: f64 },
    #[error("initial data does not satisfy H4: {0}")]
    H4NotSatisfied(String),
}

pub type Result<T> = std::result::Result<T, Error>;
