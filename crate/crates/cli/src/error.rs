use thiserror::Error;

use voicegov_core::config::ConfigError;
use voicegov_core::domain::RuleId;
use voicegov_core::engine::EngineError;
use voicegov_core::simulation::SimError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("path exists and is not empty: {0}")]
    PathExists(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("corrupt log at seq {seq}: {reason}")]
    Corrupt { seq: u64, reason: String },
    #[error("rejected: {}", .0.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(","))]
    Rejected(Vec<RuleId>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Corrupt { .. } => 2,
            CliError::Rejected(_) => 3,
            _ => 1,
        }
    }

    /// Error code used in wire responses.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::PathExists(_) => "path_exists",
            CliError::NotFound(_) => "not_found",
            CliError::Invalid(_) => "invalid",
            CliError::Corrupt { .. } => "corrupt",
            CliError::Rejected(_) => "rejected",
            CliError::Io(_) => "io",
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::CorruptLog { first_break_seq, reason } => CliError::Corrupt { seq: first_break_seq, reason },
            EngineError::Rejected(r) => CliError::Rejected(r.violations),
            EngineError::NotFound(what) => CliError::NotFound(what),
            EngineError::Io(io) => CliError::Io(io),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Config(c),
            SimError::Engine(e) => CliError::Invalid(format!("simulation: {e}")),
        }
    }
}
