//! Error classes and their stable process exit codes.

use sandbox_core::persona::PersonaError;
use sandbox_core::sensor_synth::SynthError;
use sandbox_core::session::SessionError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or arguments.
    #[error("{0}")]
    Usage(String),
    /// Input that parsed but failed validation, or did not parse at all.
    #[error("{0}")]
    Validation(String),
    /// Anything that went wrong while doing the work.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<PersonaError> for CliError {
    fn from(e: PersonaError) -> Self {
        match e {
            PersonaError::InvalidRequest(_) | PersonaError::InvalidLifestyle(_) | PersonaError::Json(_) => {
                CliError::Validation(e.to_string())
            }
            PersonaError::GenerationFailed { .. } | PersonaError::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::InvalidConfig(_) | SessionError::Schedule(_) | SessionError::Json(_) => {
                CliError::Validation(e.to_string())
            }
            SessionError::Trace(t) => t.into(),
            SessionError::Persona(p) => p.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
