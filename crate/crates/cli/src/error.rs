use thiserror::Error;

/// Failures surfaced by the command-line driver, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// The numerics could not produce a result (exit 3).
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A verification check failed (exit 4).
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<lpa_core::Error> for CliError {
    fn from(e: lpa_core::Error) -> Self {
        use lpa_core::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::InvalidMu(_)
            | E::InvalidU(_)
            | E::DeltaOutOfRange(_)
            | E::IndexOutOfRange { .. }
            | E::ScaleOrder { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<crate::ingest::IngestError> for CliError {
    fn from(e: crate::ingest::IngestError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("invalid JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("CSV: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
