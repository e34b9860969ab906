use thiserror::Error;

use crate::protocol::ProtocolError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] blindsure_core::Error),

    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dataset would take {bytes} bytes (limit {limit}); lower --trials or pass --allow-large")]
    TooLarge { bytes: u64, limit: u64 },
}

pub type CliResult<T> = std::result::Result<T, CliError>;
