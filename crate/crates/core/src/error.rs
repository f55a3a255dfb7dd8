use thiserror::Error;

/// Errors raised by model construction, the inner solvers and the planners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RmdpError {
    #[error("kernel row (s={state}, a={action}) is not stochastic (residual {residual:e})")]
    NonStochasticRow {
        state: usize,
        action: usize,
        residual: f64,
    },
    #[error("reward at (s={state}, a={action}) is outside [0, 1]: {value}")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        value: f64,
    },
    #[error("discount must lie in [0, 1), got {0}")]
    BadDiscount(f64),
    #[error("initial distribution is not a probability vector (residual {0:e})")]
    BadInitialDistribution(f64),
    #[error("model has {} violated invariant(s): {}", .0, join_errors(.1))]
    Invalid(usize, Vec<RmdpError>),
    #[error("exponent p must lie in [1, inf], got {0}")]
    BadExponent(f64),
    #[error("radius must be non-negative and finite, got {0}")]
    NegativeBeta(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("policy row for state {0} is not in the simplex")]
    NonSimplexPolicyRow(usize),
    #[error("operator expects {expected} uncertainty, got {got}")]
    ModeMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("empty vector")]
    EmptyVector,
    #[error("non-finite entry at index {0}")]
    NonFiniteEntry(usize),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("threshold bisection failed for state {state} (residual {residual:e})")]
    BisectionFailure { state: usize, residual: f64 },
    #[error("threshold policy for state {0} has no non-negative advantage")]
    DegeneratePolicyRow(usize),
    #[error("model shapes differ")]
    ShapeMismatch,
    #[error("oracle limited to {limit} states, got {got}")]
    TooManyStates { limit: usize, got: usize },
    #[error("oracle limited to {limit} deterministic policies, got {got}")]
    TooManyPolicies { limit: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join_errors(errors: &[RmdpError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = RmdpError> = std::result::Result<T, E>;
