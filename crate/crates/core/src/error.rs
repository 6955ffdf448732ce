use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the keyword-spotting engine.
#[derive(Debug, Error)]
pub enum KwsError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("corpus layout error at {path}: {reason}")]
    Layout { path: PathBuf, reason: String },

    #[error("training diverged: {0}")]
    Training(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TSV error: {0}")]
    Tsv(#[from] csv::Error),
}

impl KwsError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        KwsError::Parameter(msg.into())
    }

    pub(crate) fn layout(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        KwsError::Layout {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input or configuration, as opposed
    /// to runtime failures (I/O, divergence).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            KwsError::Parameter(_) | KwsError::Config(_) | KwsError::Layout { .. }
        )
    }
}

pub type Result<T, E = KwsError> = std::result::Result<T, E>;
