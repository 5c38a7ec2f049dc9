//! The `qpwave` command line tool.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | a hard gate failed (certificate, oracle tolerance) |
//! | 2 | invalid configuration or malformed input file |
//! | 3 | resonant box in the staged solve |
//! | 4 | staged solve did not converge |
//! | 5 | any other error (I/O, numerical failure) |
//! | 6 | `solve` without a passing certificate bundle and without `--force` |

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use qpwave_core::SolverError;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod emit;

pub use config::{Preset, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESONANT: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_OTHER: i32 = 5;
pub const EXIT_NO_CERTIFICATE: i32 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("certificate bundle unavailable: {0} (run `certify` first or pass --force)")]
    MissingCertificate(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Malformed(_) => EXIT_CONFIG,
            CliError::MissingCertificate(_) => EXIT_NO_CERTIFICATE,
            CliError::Solver(e) => match e {
                SolverError::ResonantBox { .. } => EXIT_RESONANT,
                SolverError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
                SolverError::InvalidConfig(_) | SolverError::Params(_) => EXIT_CONFIG,
                _ => EXIT_OTHER,
            },
            CliError::Io(_) | CliError::Other(_) => EXIT_OTHER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qpwave", version, about = "Localized quasi-periodic solutions of a nonlinear lattice wave equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration, used when --config is absent (default: small-coupling).
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Solve without a passing certificate bundle.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for the parallel scans.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the certificate bundle; exit 1 if a hard gate fails.
    Certify,
    /// Run the staged solver and write the solution and trace files.
    Solve {
        /// Also run the dense oracle and record the discrepancy.
        #[arg(long)]
        oracle: bool,
    },
    /// Scan Green's function bounds over the shift parameter.
    LdeScan,
    /// Summarize a solution file.
    Report {
        /// Defaults to the solution file in the output directory.
        file: Option<PathBuf>,
    },
    /// Compare the staged solve with the dense oracle.
    OracleCompare,
    /// Print the effective configuration.
    ShowConfig,
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => self.preset.unwrap_or(Preset::SmallCoupling).config(),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

fn configure_threads(threads: Option<usize>) {
    // Dense kernels stay sequential so results do not depend on the pool.
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = threads {
        // A second initialization in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs one command and returns the process exit code. Diagnostics go to
/// stderr, summaries to stdout.
pub fn run(cli: &Cli) -> i32 {
    configure_threads(cli.threads);
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qpwave: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let cfg = cli.run_config()?;
    for w in cfg.validate()? {
        eprintln!("qpwave: warning: {w}");
    }
    match &cli.command {
        Command::Certify => commands::certify(&cfg),
        Command::Solve { oracle } => commands::solve(&cfg, cli.force, *oracle),
        Command::LdeScan => commands::lde_scan(&cfg),
        Command::Report { file } => {
            let path = file.clone().unwrap_or_else(|| cfg.output.path(&cfg.output.solution));
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
            print!("{}", commands::report(&text)?);
            Ok(EXIT_OK)
        }
        Command::OracleCompare => commands::oracle_compare(&cfg),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Ok(EXIT_OK)
        }
    }
}
