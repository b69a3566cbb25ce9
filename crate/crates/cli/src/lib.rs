//! Reproducible experiment drivers behind the `mongeflow` binary.
//!
//! Every command reads an [`ExperimentConfig`], runs one experiment and
//! writes a JSON report (plus CSV series where useful) into the configured
//! output directory. Reports contain the effective config, the toolkit
//! version and the definition of every residual, and no timestamps, so
//! reruns with the same config are byte-identical.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Outcome};
pub use config::{Check, ExperimentConfig, FieldSpec, Overrides};

/// Exit status contract.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Numerics(mongeflow::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<mongeflow::Error> for CliError {
    fn from(e: mongeflow::Error) -> Self {
        use mongeflow::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::InvalidProfile(_)
            | E::InvalidArgument(_)
            | E::UnsupportedChart(_)
            | E::Expression(_)
            | E::Precondition(_)
            | E::DegenerateStart
            | E::StepTooSmall(_) => CliError::Config(e.to_string()),
            other => CliError::Numerics(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerics(_) => exit::CHECK_FAILED,
            CliError::Config(_) | CliError::Io(_) => exit::USAGE,
        }
    }
}
