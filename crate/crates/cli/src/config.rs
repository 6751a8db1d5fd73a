//! Experiment configuration: defaults, an optional JSON file, and flags, in
//! increasing order of precedence.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Sample counts, either listed or as ratios `n = round(ratio · d²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NSpec {
    Values(Vec<usize>),
    Ratios(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d_values: Vec<usize>,
    pub n_spec: NSpec,
    pub trials: u64,
    pub master_seed: u64,
    pub threads: usize,
    pub tol_residual: f64,
    pub tol_psd: f64,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d_values: vec![10, 20, 30],
            n_spec: NSpec::Ratios(vec![0.02, 0.05, 0.1, 0.2, 0.3]),
            trials: 100,
            master_seed: 1,
            threads: 0,
            tol_residual: ellfit_core::fitter::DEFAULT_TOL_RESIDUAL,
            tol_psd: ellfit_core::fitter::DEFAULT_TOL_PSD,
            output_path: None,
            output_format: None,
        }
    }
}

/// A config file: every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub d_values: Option<Vec<usize>>,
    pub n_spec: Option<NSpec>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub threads: Option<usize>,
    pub tol_residual: Option<f64>,
    pub tol_psd: Option<f64>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Overlays this file onto `base`.
    pub fn apply(self, mut base: ExperimentConfig) -> ExperimentConfig {
        if let Some(v) = self.d_values {
            base.d_values = v;
        }
        if let Some(v) = self.n_spec {
            base.n_spec = v;
        }
        if let Some(v) = self.trials {
            base.trials = v;
        }
        if let Some(v) = self.master_seed {
            base.master_seed = v;
        }
        if let Some(v) = self.threads {
            base.threads = v;
        }
        if let Some(v) = self.tol_residual {
            base.tol_residual = v;
        }
        if let Some(v) = self.tol_psd {
            base.tol_psd = v;
        }
        if self.output_path.is_some() {
            base.output_path = self.output_path;
        }
        if self.output_format.is_some() {
            base.output_format = self.output_format;
        }
        base
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.into()));
        if self.trials < 1 {
            return usage("trials must be at least 1");
        }
        if self.d_values.is_empty() || self.d_values.iter().any(|&d| d < 2) {
            return usage("d_values must be non-empty with every d >= 2");
        }
        match &self.n_spec {
            NSpec::Values(v) if v.is_empty() || v.contains(&0) => return usage("n values must be non-empty and positive"),
            NSpec::Ratios(r) if r.is_empty() || r.iter().any(|&x| !(x > 0.0 && x.is_finite())) => {
                return usage("ratios must be non-empty, finite and positive")
            }
            _ => {}
        }
        if !(self.tol_residual >= 0.0 && self.tol_psd >= 0.0) {
            return usage("tolerances must be non-negative");
        }
        if self.cells().iter().any(|&(_, n)| n == 0) {
            return usage("a ratio produced n = 0; increase the ratio or d");
        }
        Ok(())
    }

    /// `(d, n)` pairs, sorted and deduplicated.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for &d in &self.d_values {
            match &self.n_spec {
                NSpec::Values(ns) => cells.extend(ns.iter().map(|&n| (d, n))),
                NSpec::Ratios(rs) => cells.extend(rs.iter().map(|&r| (d, (r * (d * d) as f64).round() as usize))),
            }
        }
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}
