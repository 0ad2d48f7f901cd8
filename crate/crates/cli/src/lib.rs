//! Command implementations behind the `tenmtl` binary.
//!
//! Exit codes: 0 success, 2 invalid configuration or unmet precondition,
//! 3 file-system or format failure, 4 numerical failure.

pub mod commands;
pub mod io;

use tenmtl::tenmtl::FitError;
use tenmtl::tuning::TuningError;
use tenmtl::GlmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::IoError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Precondition(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match &e {
            FitError::Glm(GlmError::NonFinite) | FitError::Tensor(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<TuningError> for CliError {
    fn from(e: TuningError) -> Self {
        match e {
            TuningError::Fit(f) => f.into(),
            TuningError::NoValidTuple => CliError::Numerical(e.to_string()),
            other => CliError::Precondition(other.to_string()),
        }
    }
}
