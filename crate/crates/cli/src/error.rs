use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("endpoint: {0}")]
    Endpoint(String),
    #[error("validation: {0}")]
    Validation(String),
}

impl CliError {
    /// 0 is success; 1 config or I/O, 2 endpoint or transport, 3 invalid data.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Endpoint(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

impl From<kbqa_core::grounding::EndpointError> for CliError {
    fn from(e: kbqa_core::grounding::EndpointError) -> Self {
        CliError::Endpoint(e.to_string())
    }
}

impl From<kbqa_core::grounding::GroundError> for CliError {
    fn from(e: kbqa_core::grounding::GroundError) -> Self {
        match e {
            kbqa_core::grounding::GroundError::Endpoint(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<kbqa_core::dataset::DatasetError> for CliError {
    fn from(e: kbqa_core::dataset::DatasetError) -> Self {
        use kbqa_core::dataset::DatasetError;
        match e {
            DatasetError::Io(m) => CliError::Io { path: "<input>".into(), message: m },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<kbqa_core::eval::EvalError> for CliError {
    fn from(e: kbqa_core::eval::EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}
