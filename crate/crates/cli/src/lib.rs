//! `qaegap` command-line driver.
//!
//! Exit codes: 0 success, 2 numerical failure (non-convergence, near
//! resonance, step size, failed self-test), 3 invalid instance, config or
//! domain, 4 resource cap exceeded.

pub mod commands;
pub mod config;
pub mod selftest;

use std::ffi::OsString;

use clap::{error::ErrorKind, Parser, Subcommand};

use config::RunConfig;
use qaegap::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qaegap", version, about = "Minimum-gap estimation for adiabatic MAXCUT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a seeded random instance.
    Gen,
    /// Exact gap curve by diagonalization.
    Exact,
    /// Kohn-Sham ground state at one `s`.
    Scf,
    /// DFT gap at `--s`, or over a grid.
    Dft,
    /// Gap scan with one or both methods, plus a comparison.
    Scan,
    /// Minimum gaps over instance sizes and seeds.
    Scale,
    /// Schrodinger propagation of the annealing schedule.
    Evolve,
    /// Compare two JSON gap reports.
    Compare {
        #[arg(num_args = 2, required = true)]
        reports: Vec<std::path::PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// Self-test checks that did not pass.
    Checks(Vec<String>),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Checks(names) => write!(f, "self-test failed: {}", names.join(", ")),
        }
    }
}

pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Checks(_) => EXIT_NUMERICAL,
        CliError::Core(e) => match e {
            Error::Solver { .. }
            | Error::NonConvergence { .. }
            | Error::NearResonance { .. }
            | Error::StepSize { .. }
            | Error::DegenerateGap(_)
            | Error::InvalidState(_) => EXIT_NUMERICAL,
            Error::ResourceLimit { .. } => EXIT_RESOURCE,
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::DimensionMismatch { .. }
            | Error::Domain(_)
            | Error::DegenerateGeometry(_)
            | Error::Io { .. } => EXIT_INVALID,
        },
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command and return its one-line summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.config.resolve()?;
    let job = || commands::dispatch(&cli.command, &cfg);
    match cfg.workers {
        Some(0) => Err(Error::Validation("--workers must be positive".into()).into()),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Core(Error::InvalidArgument(format!("worker pool: {e}"))))?
            .install(job),
        None => job(),
    }
}
