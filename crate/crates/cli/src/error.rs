use circsynth_core::{Error, ModelError, ReductionError, SimError, SynthesisError};
use thiserror::Error;

/// CLI failure with a stable category and exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
    #[error("io: {0}")]
    Io(String),
    #[error("synthesis: {0}")]
    Synthesis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) | CliError::Io(_) => 3,
            CliError::Synthesis(_) => 4,
        }
    }

    /// Single line, `error[<category>]: <message>`.
    pub fn line(&self) -> String {
        let category = match self {
            CliError::Config(_) => "config",
            CliError::Model(_) => "model",
            CliError::Io(_) => "io",
            CliError::Synthesis(_) => "synthesis",
        };
        let msg = self.to_string();
        let body = msg.split_once(": ").map_or(msg.as_str(), |(_, b)| b);
        format!("error[{category}]: {}", body.replace('\n', " "))
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParam { .. } => CliError::Config(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Setup(_) => CliError::Config(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        CliError::Synthesis(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Model(e) => e.into(),
            Error::Reduction(e) => e.into(),
            Error::Synthesis(e) => e.into(),
            Error::Sim(e) => e.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
