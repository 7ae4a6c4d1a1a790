//! Experiment harness: configuration, orchestration, brute-force oracles and
//! report emission.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod report;

/// Failures of the harness, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// bad or inconsistent configuration (exit code 2)
    #[error("config error: {0}")]
    Config(String),
    /// a solver failure outside per-seed isolation (exit code 3)
    #[error(transparent)]
    Runtime(#[from] projfree::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Runtime(_) | BenchError::Io(_) => 3,
        }
    }
}

