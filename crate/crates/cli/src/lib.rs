//! Experiment driver for `feinn-core`: TOML configs in, CSV reports out.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

use feinn_core::training::TrainError;
use thiserror::Error;

pub use commands::{run_command, Command, Overrides};
pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<feinn_core::Error> for CliError {
    fn from(e: feinn_core::Error) -> Self {
        match e {
            feinn_core::Error::Train(t) => t.into(),
            feinn_core::Error::Mesh(m) => CliError::Config(m.to_string()),
            feinn_core::Error::FeSpace(f) => f.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<feinn_core::weakforms::AssemblyError> for CliError {
    fn from(e: feinn_core::weakforms::AssemblyError) -> Self {
        use feinn_core::weakforms::AssemblyError;
        match e {
            AssemblyError::BadGamma(_) | AssemblyError::BadMeshSize(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<feinn_core::nn::NnError> for CliError {
    fn from(e: feinn_core::nn::NnError) -> Self {
        match e {
            feinn_core::nn::NnError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<feinn_core::fespace::FeSpaceError> for CliError {
    fn from(e: feinn_core::fespace::FeSpaceError) -> Self {
        use feinn_core::fespace::FeSpaceError;
        match e {
            FeSpaceError::EmptyActiveSet => {
                CliError::Config("the domain does not intersect the background mesh".into())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}
