use thiserror::Error;

use crate::ledger::LedgerError;

/// Configuration and task-generation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("invalid range for {field}: [{lower}, {upper}]")]
    InvalidRange { field: String, lower: f64, upper: f64 },
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ConfigError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("times must be positive (time_1={time_1}, time_2={time_2})")]
    NonPositiveTime { time_1: f64, time_2: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrivacyError {
    #[error("true value must be positive, got {0}")]
    NonPositiveTrueValue(f64),
    #[error("unknown target worker {0:?}")]
    UnknownTarget(String),
    #[error("invalid privacy parameters: {0}")]
    InvalidParams(String),
    #[error("no trial classified the target as a true positive or false negative")]
    NoClassifiedTrials,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("total job count is zero")]
    ZeroTotalJobs,
    #[error("ledger is unavailable for reads")]
    LedgerUnavailable,
}

/// Crate-level error for operations that span modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
