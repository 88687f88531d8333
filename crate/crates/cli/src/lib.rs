//! Config-driven experiment runner.

pub mod config;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use run::{run, RunOutcome};

/// Failures mapped onto the process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid field: {0}")]
    Field(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Field(_) => 3,
            RunError::Solver(_) => 4,
        }
    }
}

impl From<aphom_core::Error> for RunError {
    fn from(e: aphom_core::Error) -> Self {
        use aphom_core::Error as E;
        match e {
            E::InvalidField(_) | E::NotElliptic { .. } => RunError::Field(e.to_string()),
            E::NotConverged { .. } | E::SingularSystem(_) => RunError::Solver(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}
