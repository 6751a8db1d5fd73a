pub mod dual;
pub mod fit;
pub mod lemma;
pub mod phase;

use crate::config::OutputFormat;
use crate::error::CliError;
use crate::Resolved;

/// Commands whose payload is a single JSON object reject `--format csv`.
pub(crate) fn require_json(settings: &Resolved, command: &str) -> Result<(), CliError> {
    match settings.format {
        Some(OutputFormat::Csv) => Err(CliError::Usage(format!("{command} emits JSON only"))),
        _ => Ok(()),
    }
}

pub(crate) fn tolerances(residual: Option<f64>, psd: Option<f64>, settings: &Resolved) -> Result<ellfit_core::Tolerances, CliError> {
    let defaults = ellfit_core::Tolerances::default();
    let tol = ellfit_core::Tolerances {
        residual: residual.or(settings.file.tol_residual).unwrap_or(defaults.residual),
        psd: psd.or(settings.file.tol_psd).unwrap_or(defaults.psd),
    };
    if !(tol.residual >= 0.0 && tol.psd >= 0.0) {
        return Err(CliError::Usage("tolerances must be non-negative".into()));
    }
    Ok(tol)
}
