use std::fmt;

use cpsim_core::Error as CoreError;
use serde_json::json;

/// Everything that ends a run with a nonzero exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    MissingFlag(String),
    Model(CoreError),
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::MissingFlag(_) => "missing_flag",
            CliError::Model(CoreError::BudgetExceeded { .. }) => "budget_exceeded",
            CliError::Model(CoreError::InvalidBracket { .. }) => "invalid_bracket",
            CliError::Model(CoreError::Divergent(_)) => "divergent",
            CliError::Model(CoreError::DimensionMismatch { .. }) => "dimension_mismatch",
            CliError::Model(CoreError::ContractViolation(_)) => "contract_violation",
            CliError::Model(CoreError::InvalidParameter(_)) => "invalid_parameter",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) | CliError::MissingFlag(_) => 3,
            CliError::Model(CoreError::BudgetExceeded { .. }) => 4,
            CliError::Model(_) => 5,
            CliError::Io(_) => 6,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        json!({
            "schema_version": 1,
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::MissingFlag(flag) => write!(f, "missing required flag --{flag}"),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Model(e)
    }
}
