//! CLI errors and the process exit codes they map to.
//!
//! | code | meaning                                    |
//! |------|--------------------------------------------|
//! | 0    | success, or parameters free of arbitrage   |
//! | 2-5  | failure type 1-4 reported by `check`       |
//! | 64   | invalid input (arguments, files, data)     |
//! | 70   | internal numerical failure                 |

use svi_noarb::domain::Status;
use svi_noarb::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 64;
pub const EXIT_NUMERIC: u8 = 70;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        use CoreError::*;
        match e {
            NoSignChange { .. }
            | MaxIterations(_)
            | NoBracketFound { .. }
            | InfeasibleStart
            | NoFiniteOptimum
            | BracketFailure(_)
            | NoConvergedStart => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Exit code of a diagnostic status.
pub fn status_exit_code(status: Status) -> u8 {
    status.failure_type().map_or(EXIT_OK, |t| t + 1)
}
