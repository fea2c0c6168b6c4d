//! Library side of the `crtsim` binary: configuration, command runners, and
//! the error-to-exit-code mapping. Kept as a library so integration tests
//! can drive the commands in process.

pub mod commands;
pub mod config;

use thiserror::Error;

/// Exit code 0 is success; config problems exit 2; a stalled-replicate
/// breach exits 3; everything else exits 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stalled-replicate threshold breached: {0}")]
    StalledBreach(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::StalledBreach(_) => 3,
            CliError::Io(_) | CliError::Run(_) => 1,
        }
    }
}

impl From<crtsim::analysis::PowerError> for CliError {
    fn from(e: crtsim::analysis::PowerError) -> Self {
        use crtsim::analysis::PowerError;
        match &e {
            PowerError::TooManyStalled { .. } => CliError::StalledBreach(e.to_string()),
            PowerError::Trial(t) if t.is_stalled() => CliError::StalledBreach(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<crtsim::ode::CompareError> for CliError {
    fn from(e: crtsim::ode::CompareError) -> Self {
        match &e {
            crtsim::ode::CompareError::InvalidSetup(_) | crtsim::ode::CompareError::Ode(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<crtsim::empirical::DataError> for CliError {
    fn from(e: crtsim::empirical::DataError) -> Self {
        match e {
            crtsim::empirical::DataError::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}
