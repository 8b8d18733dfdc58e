//! Command-line front end for the convergence-rate toolkit: Monte-Carlo
//! estimation over seeded runs, exact absorbing-chain analysis, experiment
//! comparison, and transition-model export.
//!
//! Every failure is classified into one of three exit codes so scripts can
//! branch on what went wrong: 2 for configuration and I/O problems, 3 for
//! semantically invalid inputs, 4 for numerical breakdowns (non-convergent
//! iterations, singular systems).

use thiserror::Error;

use acr_core::chain_model::ChainError;
use acr_core::ea_engine::EngineError;
use acr_core::rate_estimators::RateError;

pub mod commands;
pub mod config;
pub mod io;

/// Top-level CLI failure, tagged by exit-code class.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, unparsable, or unwritable files and malformed
    /// environment: exit code 2.
    #[error("{0}")]
    Config(String),
    /// Well-formed input that asks for something invalid: exit code 3.
    #[error("{0}")]
    Validation(String),
    /// The computation itself broke down: exit code 4.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::MalformedJson(_) => CliError::Config(e.to_string()),
            ChainError::NonConvergent | ChainError::SpectralStall { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Validation(e.to_string())
    }
}
