//! Command-line driver: verification, sweeps, sampling and plot data.

pub mod commands;
pub mod config;
pub mod exit;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{Command, FileConfig, Flags, RunConfig};
use exit::CliError;

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "GIBBS_TREE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gibbs-tree", version, about = "Splitting Gibbs measures on Cayley trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Check both fixed points of a construction
    Verify(Flags),
    /// Solve the general family over a range of n
    Sweep(Flags),
    /// Sample both measures on a ball and compare them
    Sample(Flags),
    /// Emit solution curves or the gamma series as plot-ready tables
    Plotdata(Flags),
}

impl Cmd {
    fn parts(&self) -> (Command, &Flags) {
        match self {
            Cmd::Verify(f) => (Command::Verify, f),
            Cmd::Sweep(f) => (Command::Sweep, f),
            Cmd::Sample(f) => (Command::Sample, f),
            Cmd::Plotdata(f) => (Command::Plotdata, f),
        }
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let (command, flags) = cli.command.parts();
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(command, flags, file)?;
    if let Some(path) = &flags.config_out {
        let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    let out = match command {
        Command::Verify => commands::verify(&cfg)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Sample => commands::sample(&cfg)?,
        Command::Plotdata => commands::plotdata(&cfg)?,
    };
    match &cfg.out {
        Some(path) => write_file(path, &out.body)?,
        None => std::io::stdout().write_all(&out.body).map_err(|e| CliError::io("writing stdout", e))?,
    }
    Ok(out.code)
}

/// Thread count requested through [`THREADS_ENV`], if any.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::precondition(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}
