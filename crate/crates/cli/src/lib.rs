//! Driver behind the `idla` binary. Every subcommand writes its data files
//! and a `<command>.manifest.json` into the output directory.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;
pub mod report;

use std::collections::BTreeMap;
use std::fmt;

use clap::Parser;
use idla_core::IdlaError;

use crate::args::Cli;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(IdlaError),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::Json(e) => write!(f, "json: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IdlaError> for CliError {
    fn from(e: IdlaError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                IdlaError::InvalidDimension(_)
                | IdlaError::DimensionMismatch { .. }
                | IdlaError::InvalidInput(_)
                | IdlaError::WrongDimension { .. }
                | IdlaError::LambdaOutOfRange { .. }
                | IdlaError::ConfigOutsideDomain { .. } => EXIT_USAGE,
                IdlaError::PreconditionViolated(_) | IdlaError::HypothesisViolated { .. } => EXIT_PRECONDITION,
                IdlaError::StepCapExceeded { .. } | IdlaError::DomainTooLarge { .. } | IdlaError::SolverNotConverged { .. } => EXIT_BUDGET,
                IdlaError::Io(_) | IdlaError::Json(_) => EXIT_RUNTIME,
            },
            CliError::Io(_) | CliError::Json(_) => EXIT_RUNTIME,
        }
    }
}

/// Parses `argv` (program name first), applies the config file and runs the
/// command. Returns the process exit code; messages go to stdout/stderr.
pub fn run(argv: Vec<String>) -> i32 {
    let entries = match config::config_path(&argv).map(|p| config::load(p.as_ref())) {
        Some(Ok(m)) => m,
        Some(Err(e)) => {
            eprintln!("idla: {e}");
            return e.exit_code();
        }
        None => BTreeMap::new(),
    };
    let full = config::inject(&argv, &entries);
    let cli = match Cli::try_parse_from(&full) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli, argv, entries) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("idla: {e}");
            e.exit_code()
        }
    }
}
