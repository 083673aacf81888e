use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("event budget exhausted after {processed} events (limit {limit})")]
    EventOverflow { processed: u64, limit: u64 },

    #[error("stream error: {0}")]
    Stream(String),

    #[error("csv error in {path} at line {line}: {message}")]
    CsvRow {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] asyncgp_core::CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
