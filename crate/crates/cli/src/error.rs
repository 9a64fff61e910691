use iwar_core::Error as CoreError;

/// Failure classes of a run, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// A model-construction failure: the configuration describes an invalid model.
    pub fn model(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn numeric(e: CoreError) -> Self {
        match e {
            CoreError::Config(msg) => CliError::Config(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
