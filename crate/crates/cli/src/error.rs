use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed JSON, or a value of the wrong shape.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input that violates a kind-specific or library invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Output(_) => 4,
        }
    }
}

impl From<gfl_core::Error> for CliError {
    fn from(e: gfl_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn parse<T: serde::de::DeserializeOwned>(value: &serde_json::Value, what: &str) -> CliResult<T> {
    serde_json::from_value(value.clone()).map_err(|e| CliError::Parse(format!("{what}: {e}")))
}
