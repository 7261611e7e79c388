use alloc::string::String;

/// Errors raised by model construction and the numerical routes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid window state: {0}")]
    InvalidState(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unit index {index} out of range (have {len})")]
    UnitOutOfRange { index: usize, len: usize },
    #[error("time step must be finite and non-negative, got {0}")]
    NegativeStep(f64),
    #[error("non-finite rate for {0}")]
    NonFiniteRate(String),
    #[error("{unit}: step probability h*rate = {product} exceeds 1 (grid q = {q}); increase q")]
    StepProbability { unit: String, product: f64, q: usize },
    #[error("state space exceeds cap of {cap} states (reached {reached})")]
    StateCapExceeded { cap: usize, reached: usize },
    #[error("power iteration did not converge in {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("degenerate sampling plan: {0}")]
    DegenerateGrid(String),
    #[error("no samples fell in the selected component")]
    EmptySample,
    #[error("rate function violates the support requirement: {0}")]
    Support(String),
    #[error("non-integrable density: {0}")]
    NonIntegrable(String),
    #[error("incompatible density grids: {0}")]
    IncompatibleGrid(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
