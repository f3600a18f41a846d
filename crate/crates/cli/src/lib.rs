//! Command-line front end for `dpsense`: configuration parsing, sweeps,
//! figure pipelines and CSV output.

pub mod config;
pub mod figures;
pub mod sweep;
pub mod table;

use std::fmt;

pub use config::{parse_sweep, ConfigError};
pub use sweep::{run_sweep, Axis, Output, SolverSettings, SweepSpec, Tier};
pub use table::{Cell, Table};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(dpsense::Error),
    Validation(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Io(_) => exit::IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Validation(m) => write!(f, "validation failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dpsense::Error> for CliError {
    fn from(e: dpsense::Error) -> Self {
        match e {
            dpsense::Error::InvalidParameter(m) => CliError::Config(m),
            dpsense::Error::PhaseUnidentifiable => CliError::Config(e.to_string()),
            dpsense::Error::Io(m) => CliError::Io(std::io::Error::other(m)),
            e => CliError::Numerical(e),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
