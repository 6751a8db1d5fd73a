//! Success-frequency estimates of the ansatz over `(d, n)` grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fitter::{fit_trial, FailureReason, Tolerances, TrialRecord};
use crate::stats::{wilson_interval, Z95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub d: usize,
    pub n: usize,
    /// `n / d²`.
    pub ratio: f64,
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub failure_theta_not_pd: u64,
    pub failure_psd: u64,
}

impl PhaseCell {
    pub fn from_records(d: usize, n: usize, records: &[TrialRecord]) -> Self {
        let trials = records.len() as u64;
        let successes = records.iter().filter(|r| r.success).count() as u64;
        let count = |reason| records.iter().filter(|r| r.failure_reason == reason).count() as u64;
        let (wilson_lo, wilson_hi) = wilson_interval(successes, trials, Z95);
        Self {
            d,
            n,
            ratio: n as f64 / (d * d) as f64,
            trials,
            successes,
            frequency: successes as f64 / trials as f64,
            wilson_lo,
            wilson_hi,
            failure_theta_not_pd: count(FailureReason::ThetaNotPd),
            failure_psd: count(FailureReason::PsdViolation),
        }
    }
}

/// Runs `trials` fits per cell. Trial `t` of every cell draws from the same
/// stream, so cells at equal `d` share a prefix of their point clouds.
pub fn run_cell(d: usize, n: usize, trials: u64, master_seed: u64, tol: &Tolerances) -> PhaseCell {
    assert!(trials >= 1, "a phase cell needs at least one trial");
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| fit_trial(d, n, master_seed, t as u32, tol))
        .collect();
    PhaseCell::from_records(d, n, &records)
}

/// One cell per `(d, n)` pair, sorted by `(d, n)` with duplicates removed.
pub fn run_phase(cells: &[(usize, usize)], trials: u64, master_seed: u64, tol: &Tolerances) -> Vec<PhaseCell> {
    let mut cells = cells.to_vec();
    cells.sort_unstable();
    cells.dedup();
    cells.into_iter().map(|(d, n)| run_cell(d, n, trials, master_seed, tol)).collect()
}
