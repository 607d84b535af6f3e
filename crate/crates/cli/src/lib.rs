//! Command implementations behind the `turnpike` binary.
//!
//! Every command builds its whole [`output::Bundle`] in memory first, so a
//! failure before the solve leaves the output directory untouched.

pub mod commands;
pub mod output;
pub mod scenario_file;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or an unreadable or invalid scenario.
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// A library call failed where its preconditions were already checked.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io(_) => exit::USAGE,
            Self::Internal(_) => exit::INVARIANT,
        }
    }
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const INVARIANT: i32 = 3;
}

pub(crate) fn internal(e: turnpike_core::Error) -> CliError {
    CliError::Internal(e.to_string())
}
