use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Exhaustive path enumeration would visit more than `budget` paths.
    #[error("enumeration budget exceeded: {required} paths requested, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("divergent quantity: {0}")]
    Divergent(String),

    #[error(
        "invalid bracket [{lambda_lo}, {lambda_hi}]: survival {survival_lo} at the lower end, \
         {survival_hi} at the upper end, threshold {epsilon}"
    )]
    InvalidBracket {
        lambda_lo: f64,
        lambda_hi: f64,
        survival_lo: f64,
        survival_hi: f64,
        epsilon: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
