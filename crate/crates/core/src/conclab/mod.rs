//! Monte Carlo checks of the concentration estimates behind the ansatz:
//! kernel Gram deviation, truncated weights, tail bounds, flattened moments,
//! and per-direction diagnostics.
//!
//! Every trial draws from its own [`RandomStream`](crate::rng::RandomStream)
//! keyed by the estimator's purpose tag and the trial index, so results depend
//! only on the master seed.

pub mod deviation;
pub mod directions;
pub mod moments;
pub mod quadrature;
pub mod tails;
pub mod truncation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::binomial_slack;

/// Multiplier on the binomial standard error used by every bound check.
pub const SLACK_SIGMAS: f64 = 3.0;

/// Empirical survival frequencies against an upper bound on a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub thresholds: Vec<f64>,
    pub empirical_survival: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub trials: u64,
}

/// One grid point of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub threshold: f64,
    pub empirical: f64,
    pub bound: f64,
    pub trials: u64,
    pub pass: bool,
}

impl TailCurve {
    /// `P[stat ≥ t]` for each `t`, with `bound(t)` clipped to `[0, 1]`.
    pub fn from_statistics(stats: &[f64], thresholds: &[f64], bound: impl Fn(f64) -> f64) -> Self {
        let trials = stats.len() as u64;
        let empirical_survival = thresholds
            .iter()
            .map(|&t| stats.iter().filter(|&&s| s >= t).count() as f64 / trials as f64)
            .collect();
        Self::new(thresholds.to_vec(), empirical_survival, thresholds.iter().map(|&t| bound(t)).collect(), trials)
    }

    pub fn new(thresholds: Vec<f64>, empirical_survival: Vec<f64>, bound_values: Vec<f64>, trials: u64) -> Self {
        let bound_values = bound_values.into_iter().map(clip_probability).collect();
        Self { thresholds, empirical_survival, bound_values, trials }
    }

    /// `empirical ≤ bound + 3·√(bound(1−bound)/trials)` at grid point `i`.
    pub fn passes_at(&self, i: usize) -> bool {
        let b = self.bound_values[i];
        self.empirical_survival[i] <= b + binomial_slack(b, self.trials, SLACK_SIGMAS)
    }

    pub fn passes(&self) -> bool {
        (0..self.thresholds.len()).all(|i| self.passes_at(i))
    }

    pub fn is_monotone(&self) -> bool {
        self.empirical_survival.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn rows(&self) -> Vec<CheckRow> {
        (0..self.thresholds.len())
            .map(|i| CheckRow {
                threshold: self.thresholds[i],
                empirical: self.empirical_survival[i],
                bound: self.bound_values[i],
                trials: self.trials,
                pass: self.passes_at(i),
            })
            .collect()
    }

    /// Pointwise maximum of two curves on the same grid.
    pub fn pointwise_max(&self, other: &TailCurve) -> TailCurve {
        assert_eq!(self.thresholds, other.thresholds);
        let emp = self.empirical_survival.iter().zip(&other.empirical_survival).map(|(a, b)| a.max(*b)).collect();
        let bound = self.bound_values.iter().zip(&other.bound_values).map(|(a, b)| a.min(*b)).collect();
        TailCurve::new(self.thresholds.clone(), emp, bound, self.trials.min(other.trials))
    }
}

fn clip_probability(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

/// Sorts a threshold grid ascending and rejects NaNs and empty grids.
pub(crate) fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Precondition("threshold grid is empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("threshold grid has non-finite values".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

pub(crate) fn require_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::Precondition("trials must be at least 1".into()))
    } else {
        Ok(())
    }
}
