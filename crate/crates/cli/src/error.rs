use thiserror::Error;

/// Top-level CLI failure classes, mapped to process exit codes:
/// config and input parse errors exit 2, model/runtime errors exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<enose_core::gas::GasError> for CliError {
    fn from(e: enose_core::gas::GasError) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

impl From<enose_core::protocol::ProtocolError> for CliError {
    fn from(e: enose_core::protocol::ProtocolError) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

impl From<enose_core::daq::DaqError> for CliError {
    fn from(e: enose_core::daq::DaqError) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

impl From<enose_core::classifier::ClassifierError> for CliError {
    fn from(e: enose_core::classifier::ClassifierError) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}
