use clap::Args;
use serde::Serialize;

use ellfit_core::cloud::sample_gaussian_cloud;
use ellfit_core::dual::{certificate_search, grid_oracle, DualVector, GridVerdict, SearchOptions};
use ellfit_core::fitter::trial_stream;
use ellfit_core::rng::{Purpose, RandomStream};

use crate::error::{CliError, ExitStatus};
use crate::{output, Outcome, Resolved};

#[derive(Debug, Clone, Args)]
pub struct DualArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,
    #[arg(long, default_value_t = SearchOptions::default().max_iters)]
    pub iters: usize,
    #[arg(long, default_value_t = SearchOptions::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = SearchOptions::default().step)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub trial_index: u32,
    /// Grid size for the exhaustive oracle, run when `n ≤ 4`.
    #[arg(long, default_value_t = 10_000)]
    pub grid_points: usize,
}

#[derive(Debug, Serialize)]
pub struct DualReport {
    pub d: usize,
    pub n: usize,
    pub master_seed: u64,
    pub trial_index: u32,
    pub valid: bool,
    pub best: DualVector,
    pub best_restart: usize,
    pub trace: Vec<f64>,
    pub grid_oracle: Option<GridVerdict>,
}

/// Stream for the search restarts of trial `index`.
pub fn search_stream(seed: u64, index: u32) -> RandomStream {
    RandomStream::for_purpose(seed, Purpose::DualRestart, index)
}

pub fn run(args: &DualArgs, settings: &Resolved) -> Result<Outcome, CliError> {
    super::require_json(settings, "dual")?;
    let (d, n) = (args.d as usize, args.n as usize);
    let cloud = sample_gaussian_cloud(d, n, &trial_stream(settings.seed, args.trial_index));
    let opts = SearchOptions { max_iters: args.iters, restarts: args.restarts, step: args.step };
    let out = certificate_search(&cloud, &opts, &search_stream(settings.seed, args.trial_index))?;
    let grid = if n <= 4 { Some(grid_oracle(&cloud, args.grid_points)?) } else { None };
    let report = DualReport {
        d,
        n,
        master_seed: settings.seed,
        trial_index: args.trial_index,
        valid: out.best.valid,
        best: out.best,
        best_restart: out.best_restart,
        trace: out.trace,
        grid_oracle: grid,
    };
    Ok(Outcome { payload: output::json(&report), status: ExitStatus::Pass })
}
