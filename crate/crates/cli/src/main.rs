use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod decompose;
mod manifest;
mod norm;
mod plot;
mod report;
mod verify;

use manifest::Run;

#[derive(Parser)]
#[command(name = "varexp", version, about = "Variable-exponent norms, atomic decompositions and inequality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Lebesgue, mixed, space and sequence norms of the manifest input.
    Norm(Common),
    /// Decompose the manifest input into atoms and report reconstruction errors.
    Decompose(Common),
    /// Run inequality suites and report every tested case.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; defaults to the manifest's `output` entry.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Overrides the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Failure with the exit code it maps to.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: u8,
    pub error: &'static str,
    pub message: String,
}

impl CliError {
    pub fn manifest(message: String) -> Self {
        CliError { code: 2, error: "manifest", message }
    }
    pub fn gate(e: varexp::Error) -> Self {
        CliError { code: 2, error: e.kind(), message: e.to_string() }
    }
    pub fn gate_msg(message: String) -> Self {
        CliError { code: 2, error: "precondition", message }
    }
    pub fn unknown_suite(name: &str, known: &[&str]) -> Self {
        CliError { code: 2, error: "unknown_suite", message: format!("unknown suite {name:?}; known suites: {}", known.join(", ")) }
    }
    pub fn io(e: impl std::fmt::Display) -> Self {
        CliError { code: 3, error: "io", message: e.to_string() }
    }
    pub fn internal(message: String) -> Self {
        CliError { code: 3, error: "internal", message }
    }
}

impl From<varexp::Error> for CliError {
    fn from(e: varexp::Error) -> Self {
        match e {
            varexp::Error::Io(_) => CliError::io(e),
            e => CliError { code: 3, error: e.kind(), message: e.to_string() },
        }
    }
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Done,
    /// Some assertions failed.
    Failed,
}

/// Reject unknown suite names before any work is done.
pub fn check_suites(run: &Run, known: &[&str]) -> Result<(), CliError> {
    match run.manifest.suites.iter().find(|s| !known.contains(&s.as_str())) {
        Some(bad) => Err(CliError::unknown_suite(bad, known)),
        None => Ok(()),
    }
}

pub fn create_out(run: &Run) -> Result<(), CliError> {
    std::fs::create_dir_all(&run.out).map_err(CliError::io)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("VAREXP_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::manifest(format!("VAREXP_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(CliError::manifest("VAREXP_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::internal(e.to_string()))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    init_threads()?;
    let (c, cmd): (&Common, fn(&Run, bool) -> Result<Outcome, CliError>) = match &cli.command {
        Command::Norm(c) => (c, norm::run),
        Command::Decompose(c) => (c, decompose::run),
        Command::Verify(c) => (c, verify::run),
    };
    let run = Run::load(&c.manifest, c.out.clone(), c.seed)?;
    cmd(&run, c.plots)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("plain struct"));
            ExitCode::from(e.code)
        }
    }
}
