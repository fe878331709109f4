//! The `at2` command line.
//!
//! Every command writes `key=value` lines or CSV to stdout and prose to
//! stderr. Exit codes are fixed: [`EXIT_OK`], [`EXIT_VIOLATION`] and
//! [`EXIT_USAGE`].

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

pub mod args;
mod cross;
mod curve;
mod shm;
mod sim;

pub use args::{ConsensusArgs, CrossArgs, CurveArgs, RunSimArgs, SmCheckArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "at2", version, about = "Asset-transfer simulations, checkers and bound calculators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the message-passing transfer system and check its invariants.
    RunSim(RunSimArgs),
    /// Check linearizability of the shared-memory object under random schedules.
    SmCheck(SmCheckArgs),
    /// Solve consensus through a shared account and check the outcome.
    ConsensusDemo(ConsensusArgs),
    /// Emit a CSV of failure bounds over a parameter sweep.
    EpsilonCurve(CurveArgs),
    /// Compare a failure bound with the frequency observed in simulation.
    CrossValidate(CrossArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("output: {e}"))
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// What a command found: `true` when every checked property held.
pub(crate) type Outcome = Result<bool, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::RunSim(a) => sim::run_sim(&a, out, err),
        Command::SmCheck(a) => shm::sm_check(&a, out, err),
        Command::ConsensusDemo(a) => shm::consensus_demo(&a, out, err),
        Command::EpsilonCurve(a) => curve::epsilon_curve(&a, out, err),
        Command::CrossValidate(a) => cross::cross_validate(&a, out, err),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VIOLATION,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_VIOLATION
        }
    }
}

pub(crate) fn ok_str(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}
