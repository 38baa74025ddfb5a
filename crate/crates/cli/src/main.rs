//! `kslab`: constants, condition sweeps, PDE runs, particle runs and cross-checks.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kslab_core::KsError;

#[derive(Debug, Parser)]
#[command(name = "kslab", version, about = "Keller-Segel and McKean-Vlasov particle laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, env = "KSLAB_WORKERS")]
    workers: Option<usize>,

    /// Validate the configuration and print the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Output format for tables and snapshots.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derived constants and both condition reports under both conventions; optional chi sweep.
    Constants,
    /// Run the spectral PDE solver to T or blow-up.
    SolvePde,
    /// Run the interacting particle system.
    Simulate,
    /// Cross-check a particle run against a PDE run.
    Compare {
        /// Output directory of a `solve-pde` or `simulate` run.
        #[arg(long)]
        run_a: Option<PathBuf>,
        /// Output directory of the other run. Missing runs are computed from the configuration.
        #[arg(long)]
        run_b: Option<PathBuf>,
    },
}

/// Outcome of a command, mapped to the process exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Check(String),
    BlowUp(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Check(_) => 3,
            Failure::BlowUp(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Check(m) | Failure::BlowUp(m) | Failure::Other(m) => m,
        }
    }
}

impl From<KsError> for Failure {
    fn from(e: KsError) -> Self {
        match e {
            KsError::Config(_)
            | KsError::Domain(_)
            | KsError::GridMismatch(_)
            | KsError::BackendMismatch(_)
            | KsError::CutoffViolation(_)
            | KsError::ConfigMismatch(_) => Failure::Config(e.to_string()),
            KsError::BlowUp(_) => Failure::BlowUp(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

pub struct Context {
    pub config: kslab_core::io::RunConfig,
    pub out: PathBuf,
    pub dry_run: bool,
    pub format: Option<Format>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Other(e.to_string()))?;
    }
    let path = cli.config.ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let mut config = kslab_core::io::RunConfig::from_path(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let ctx = Context { config, out, dry_run: cli.dry_run, format: cli.format };
    match cli.command {
        Command::Constants => commands::constants(&ctx),
        Command::SolvePde => commands::solve_pde(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Compare { run_a, run_b } => commands::compare(&ctx, run_a, run_b),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kslab: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
