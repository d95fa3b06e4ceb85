//! Command implementations behind the `rcuc` binary.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

pub use config::RunConfig;

/// Outcomes that map to exit code 1 rather than 2.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Infeasible(String),
    Violation(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
            Failure::Violation(m) => write!(f, "RoCoF violation: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

/// Exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.downcast_ref::<Failure>().is_some()) {
        EXIT_FAILURE
    } else {
        EXIT_INPUT
    }
}
