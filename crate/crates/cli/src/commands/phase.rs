use clap::Args;
use serde::Serialize;

use ellfit_core::phase::{run_phase, PhaseCell};

use crate::config::{ExperimentConfig, NSpec, OutputFormat};
use crate::error::{CliError, ExitStatus};
use crate::output::{self, real, Table};
use crate::{Outcome, Resolved};

#[derive(Debug, Clone, Default, Args)]
pub struct PhaseArgs {
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', conflicts_with = "ratios")]
    pub n_values: Option<Vec<usize>>,
    /// `n = round(ratio · d²)`.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub tol_residual: Option<f64>,
    #[arg(long)]
    pub tol_psd: Option<f64>,
}

pub const PHASE_HEADER: [&str; 10] =
    ["d", "n", "ratio", "trials", "successes", "frequency", "wilson_lo", "wilson_hi", "failure_theta_not_pd", "failure_psd"];

/// Merges flags over the config file over defaults.
pub fn resolve_config(args: &PhaseArgs, settings: &Resolved) -> Result<ExperimentConfig, CliError> {
    let mut cfg = settings.file.clone().apply(ExperimentConfig::default());
    cfg.master_seed = settings.seed;
    cfg.threads = settings.threads;
    cfg.output_path = settings.out.clone();
    cfg.output_format = settings.format;
    if let Some(v) = &args.d_values {
        cfg.d_values = v.clone();
    }
    if let Some(v) = &args.n_values {
        cfg.n_spec = NSpec::Values(v.clone());
    }
    if let Some(v) = &args.ratios {
        cfg.n_spec = NSpec::Ratios(v.clone());
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.tol_residual {
        cfg.tol_residual = t;
    }
    if let Some(t) = args.tol_psd {
        cfg.tol_psd = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn phase_table(cells: &[PhaseCell]) -> Table {
    let mut t = Table::new(PHASE_HEADER.to_vec());
    for c in cells {
        t.push(vec![
            c.d.to_string(),
            c.n.to_string(),
            real(c.ratio),
            c.trials.to_string(),
            c.successes.to_string(),
            real(c.frequency),
            real(c.wilson_lo),
            real(c.wilson_hi),
            c.failure_theta_not_pd.to_string(),
            c.failure_psd.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Serialize)]
struct PhaseReport<'a> {
    master_seed: u64,
    trials: u64,
    cells: &'a [PhaseCell],
}

pub fn run(args: &PhaseArgs, settings: &Resolved) -> Result<Outcome, CliError> {
    let cfg = resolve_config(args, settings)?;
    let tol = ellfit_core::Tolerances { residual: cfg.tol_residual, psd: cfg.tol_psd };
    let cells = run_phase(&cfg.cells(), cfg.trials, cfg.master_seed, &tol);
    let payload = match cfg.output_format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => phase_table(&cells).render(),
        OutputFormat::Json => output::json(&PhaseReport { master_seed: cfg.master_seed, trials: cfg.trials, cells: &cells }),
    };
    Ok(Outcome { payload, status: ExitStatus::Pass })
}
