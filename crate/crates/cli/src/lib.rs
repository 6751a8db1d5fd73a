//! `ellfit` command-line harness: single fits, phase-diagram sweeps, Monte
//! Carlo checks of the concentration estimates, and dual certificate search.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{dual::DualArgs, fit::FitArgs, lemma::LemmaArgs, phase::PhaseArgs};
use config::{ConfigFile, OutputFormat};
pub use error::{CliError, ExitStatus};

#[derive(Debug, Parser)]
#[command(name = "ellfit", version, about = "Identity-perturbation ellipsoid fitting experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// JSON config file with keys named as in the experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one sampled cloud.
    Fit(FitArgs),
    /// Success frequencies over a (d, n) grid.
    Phase(PhaseArgs),
    /// Monte Carlo check of one concentration estimate.
    Lemma(LemmaArgs),
    /// Search for a certificate of infeasibility.
    Dual(DualArgs),
}

/// Global settings after merging flags, the config file and defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub file: ConfigFile,
}

impl Resolved {
    pub fn new(global: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &global.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Self {
            seed: global.seed.or(file.master_seed).unwrap_or(1),
            threads: global.threads.or(file.threads).unwrap_or(0),
            out: global.out.clone().or_else(|| file.output_path.clone()),
            format: global.format.or(file.output_format),
            file,
        })
    }

    pub fn meta(&self, command: &str) -> serde_json::Value {
        serde_json::json!({
            "command": command,
            "master_seed": self.seed,
            "threads": self.threads,
            "host": std::env::var("HOSTNAME").unwrap_or_default(),
        })
    }
}

/// Outcome of a command: the rendered payload and whether its checks passed.
pub struct Outcome {
    pub payload: String,
    pub status: ExitStatus,
}

pub fn execute(cli: &Cli) -> Result<ExitStatus, CliError> {
    let settings = Resolved::new(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", settings.threads)))?;
    let (name, outcome) = pool.install(|| -> Result<_, CliError> {
        Ok(match &cli.command {
            Command::Fit(a) => ("fit", commands::fit::run(a, &settings)?),
            Command::Phase(a) => ("phase", commands::phase::run(a, &settings)?),
            Command::Lemma(a) => ("lemma", commands::lemma::run(a, &settings)?),
            Command::Dual(a) => ("dual", commands::dual::run(a, &settings)?),
        })
    })?;
    output::emit(&outcome.payload, settings.out.as_deref(), &settings.meta(name))?;
    Ok(outcome.status)
}

/// Parses `args` and runs; returns the process exit code. Usage errors,
/// including clap's, map to 1; `--help` and `--version` exit 0.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage.code() } else { ExitStatus::Pass.code() };
        }
    };
    match execute(&cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("ellfit: {e}");
            e.status().code()
        }
    }
}
