//! The `cca` command-line front end.
//!
//! [`parse`] turns argv into a fully validated [`Command`]; [`dispatch`]
//! runs it, writes CSV artifacts plus a verdict JSON under `--out`, and maps
//! the outcome to an exit status: 0 when every verdict passes, 1 when one
//! fails, 2 on usage or operational errors.

mod args;
mod pipelines;

use std::ffi::OsString;
use std::path::PathBuf;

use thiserror::Error;

pub use args::{Cli, Settings, Subcommand, Thresholds};
pub use pipelines::{
    blowup_verdicts, exponent_verdicts, growth_medians, limit_law_verdicts, oracle_verdicts,
    timechange_verdicts, OracleJob, OracleRow, TimeChangeJob, TimeChangeRun, Verdict,
};

use crate::ensemble::EnsembleConfig;
use crate::lattice1d::Config1D;
use crate::latticed::ConfigD;
use crate::stats::BlowupConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error)]
pub enum UsageError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ensemble(#[from] crate::ensemble::EnsembleError),
    #[error(transparent)]
    Engine(#[from] crate::error::EngineError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Other(String),
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Simulate(Config1D),
    Ensemble(EnsembleConfig),
    LimitLaw(EnsembleConfig),
    Exponent {
        alpha: f64,
        source: ExponentSource,
    },
    TimeChange(TimeChangeJob),
    Oracle(OracleJob),
    Blowup(BlowupConfig),
    Simulate2d(ConfigD),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExponentSource {
    Csv(PathBuf),
    Run(EnsembleConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub name: &'static str,
    pub job: Job,
    pub out: PathBuf,
    pub parallelism: usize,
    pub thresholds: Thresholds,
}

/// Parses and validates argv (including the program name).
pub fn parse<I, T>(argv: I) -> Result<Command, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(argv)?;
    args::resolve(cli)
}

/// Runs a command; returns the verdicts it produced (empty for plain
/// simulation commands).
pub fn dispatch(cmd: &Command) -> Result<Vec<Verdict>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cmd.parallelism)
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    pool.install(|| pipelines::execute(cmd))
}

/// Full entry point used by the binary: parse, dispatch, report.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = match parse(argv) {
        Ok(c) => c,
        Err(UsageError::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match dispatch(&cmd) {
        Ok(verdicts) => {
            for v in &verdicts {
                println!("{v}");
            }
            if verdicts.iter().all(|v| v.pass) {
                EXIT_PASS
            } else {
                EXIT_VERDICT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
