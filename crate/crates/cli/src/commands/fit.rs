use clap::Args;
use serde::Serialize;

use ellfit_core::cloud::sample_gaussian_cloud;
use ellfit_core::fitter::{fit_trial_on, solve_with_options, trial_stream, TrialRecord};

use crate::error::{CliError, ExitStatus};
use crate::{output, Outcome, Resolved};

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Trial index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    pub trial_index: u32,
    #[arg(long)]
    pub tol_residual: Option<f64>,
    #[arg(long)]
    pub tol_psd: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub master_seed: u64,
    pub record: TrialRecord,
    pub q: Option<Vec<f64>>,
    pub lambda_min_sigma: Option<f64>,
    pub residual_max: Option<f64>,
    pub theta_inv_op_norm: Option<f64>,
    pub error: Option<String>,
}

pub fn run(args: &FitArgs, settings: &Resolved) -> Result<Outcome, CliError> {
    super::require_json(settings, "fit")?;
    let tol = super::tolerances(args.tol_residual, args.tol_psd, settings)?;
    let cloud = sample_gaussian_cloud(args.d as usize, args.n as usize, &trial_stream(settings.seed, args.trial_index));
    let (record, fit) = fit_trial_on(&cloud, args.trial_index, &tol);
    let (report, status) = match fit {
        Some(fit) => {
            let status = if fit.success { ExitStatus::Pass } else { ExitStatus::BoundFailure };
            let report = FitReport {
                master_seed: settings.seed,
                record,
                q: Some(fit.q.iter().copied().collect()),
                lambda_min_sigma: Some(fit.lambda_min_sigma),
                residual_max: Some(fit.residual_max),
                theta_inv_op_norm: solve_with_options(&cloud, &tol, true).ok().and_then(|f| f.theta_inv_op_norm),
                error: None,
            };
            (report, status)
        }
        None => {
            let error = solve_with_options(&cloud, &tol, false).err().map(|e| e.to_string());
            let report = FitReport {
                master_seed: settings.seed,
                record,
                q: None,
                lambda_min_sigma: None,
                residual_max: None,
                theta_inv_op_norm: None,
                error,
            };
            (report, ExitStatus::Numeric)
        }
    };
    Ok(Outcome { payload: output::json(&report), status })
}
