use memi_core::config::ConfigError;
use memi_core::data::DataError;
use memi_core::inference::InferenceError;
use memi_core::simulate::SimulateError;
use memi_core::{ModelError, SamplerError};
use thiserror::Error;

/// A command failure, classified by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(format!("config: {e}")),
            _ => CliError::Validation(format!("config: {e}")),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(format!("data: {e}")),
            _ => CliError::Validation(format!("data: {e}")),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(format!("model: {e}"))
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidArgument(_) | SamplerError::Config(_) => {
                CliError::Validation(format!("sampler: {e}"))
            }
            _ => CliError::Numerical(format!("sampler: {e}")),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        CliError::Numerical(format!("inference: {e}"))
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::InvalidArgument(_) | SimulateError::Formula(_) => {
                CliError::Validation(format!("simulate: {e}"))
            }
            _ => CliError::Numerical(format!("naive fit: {e}")),
        }
    }
}
