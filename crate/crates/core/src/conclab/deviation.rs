//! Operator-norm deviation of the kernel Gram matrix and of its inverse,
//! the `‖Θ⁻¹ y‖_∞` event, and the deterministic inverse-perturbation bound.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truncation::{centered_weights, condition_norms, expected_truncated_qtilde};
use crate::cloud::{sample_gaussian_cloud_with, sample_sphere_rows};
use crate::error::{Error, Result};
use crate::fitter::{expected_kernel_gram, kernel_gram_of_directions};
use crate::linalg::{op_norm, sym_eig_extremes, sym_eigenvalues, Cholesky, SymMatrix};
use crate::rng::{Purpose, RandomStream};
use crate::stats::quantile;

/// Constants of `‖Θ − EΘ‖_op ≤ c1/d + c2 (√(n/d²) + n/d²)` and of
/// `‖Θ⁻¹ − (I − 11ᵀ/n)‖_op ≤ c1/d + c2_inverse √(n/d²) + d/n`. The defaults
/// were fitted once by a pre-run; see the README.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationConstants {
    pub c1: f64,
    pub c2: f64,
    pub c2_inverse: f64,
}

impl Default for DeviationConstants {
    fn default() -> Self {
        Self { c1: 1.0, c2: 3.0, c2_inverse: 5.0 }
    }
}

impl DeviationConstants {
    pub fn gram_bound(&self, d: usize, n: usize) -> f64 {
        let r = n as f64 / (d as f64).powi(2);
        self.c1 / d as f64 + self.c2 * (r.sqrt() + r)
    }

    pub fn inverse_bound(&self, d: usize, n: usize) -> f64 {
        let r = n as f64 / (d as f64).powi(2);
        self.c1 / d as f64 + self.c2_inverse * r.sqrt() + d as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub d: usize,
    pub n: usize,
    pub trials: u64,
    /// `‖Θ − EΘ‖_op` per trial.
    pub gram_deviation: Vec<f64>,
    /// `‖Θ⁻¹ − (I − 11ᵀ/n)‖_op` per trial; `None` when Θ did not factor.
    pub inverse_deviation: Vec<Option<f64>>,
    /// `‖Θ⁻¹‖_op` per trial; `None` when Θ did not factor.
    pub theta_inv_op_norm: Vec<Option<f64>>,
    pub failed_factorizations: u64,
    pub gram_quantiles: Quantiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { q50: f64::NAN, q90: f64::NAN, q99: f64::NAN, max: f64::NAN };
        }
        Self {
            q50: quantile(xs, 0.5),
            q90: quantile(xs, 0.9),
            q99: quantile(xs, 0.99),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl DeviationStats {
    pub fn median_gram_deviation(&self) -> f64 {
        self.gram_quantiles.q50
    }

    /// Fraction of trials with `‖Θ⁻¹‖_op ≤ level`; failed factorizations count
    /// as misses.
    pub fn inverse_norm_frequency(&self, level: f64) -> f64 {
        let hits = self.theta_inv_op_norm.iter().filter(|v| matches!(v, Some(x) if *x <= level)).count();
        hits as f64 / self.trials as f64
    }

    pub fn inverse_deviation_values(&self) -> Vec<f64> {
        self.inverse_deviation.iter().flatten().copied().collect()
    }
}

struct GramTrial {
    gram: f64,
    inverse: Option<f64>,
    inv_norm: Option<f64>,
}

fn gram_trial(d: usize, n: usize, stream: RandomStream) -> Result<GramTrial> {
    let mut rng = stream.rng();
    let dirs = sample_sphere_rows(d, n, &mut rng);
    let theta = kernel_gram_of_directions(&dirs).theta;
    let gram = op_norm(&theta.sub(&expected_kernel_gram(n, d)))?;
    let (inverse, inv_norm) = match Cholesky::factor(&theta) {
        Ok(chol) => {
            let inv = chol.inverse();
            let centered = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 });
            let dev = op_norm(&inv.sub(&centered))?;
            let lo = sym_eigenvalues(&theta)?[0];
            (Some(dev), Some(1.0 / lo))
        }
        Err(_) => (None, None),
    };
    Ok(GramTrial { gram, inverse, inv_norm })
}

/// Samples `trials` independent kernel Gram matrices of `n` sphere directions.
pub fn gram_deviation(d: usize, n: usize, trials: u64, master_seed: u64) -> Result<DeviationStats> {
    if d < 1 || n < 1 || trials == 0 {
        return Err(Error::Precondition("gram deviation needs d, n, trials >= 1".into()));
    }
    let results: Vec<GramTrial> = (0..trials)
        .into_par_iter()
        .map(|t| gram_trial(d, n, RandomStream::for_purpose(master_seed, Purpose::GramDeviation, t as u32)))
        .collect::<Result<_>>()?;
    let gram_deviation: Vec<f64> = results.iter().map(|r| r.gram).collect();
    let failed = results.iter().filter(|r| r.inv_norm.is_none()).count() as u64;
    Ok(DeviationStats {
        d,
        n,
        trials,
        gram_quantiles: Quantiles::of(&gram_deviation),
        gram_deviation,
        inverse_deviation: results.iter().map(|r| r.inverse).collect(),
        theta_inv_op_norm: results.iter().map(|r| r.inv_norm).collect(),
        failed_factorizations: failed,
    })
}

pub const INFTY_NORM_CONSTANTS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Frequencies of `‖M y‖_∞ ≤ C ‖M‖_op d^{-3/8}` for each `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InftyNormReport {
    pub d: usize,
    pub n: usize,
    pub trials: u64,
    pub identity_operator: bool,
    pub constants: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `min(1, 2n exp(−d^{1/4}))`, the bound on the miss probability.
    pub miss_bound: f64,
    pub failed_factorizations: u64,
}

/// `(‖M y‖_∞, ‖M‖_op)` with `M = Θ⁻¹`.
pub fn infty_norm_statistic(theta: &SymMatrix, y: &[f64]) -> Result<(f64, f64)> {
    let chol = Cholesky::factor(theta)?;
    let my = chol.solve(&DVector::from_column_slice(y))?;
    let lo = sym_eigenvalues(theta)?[0];
    Ok((my.amax(), 1.0 / lo))
}

/// Whether `‖M y‖_∞ ≤ C ‖M‖_op d^{-3/8}`.
pub fn infty_event_holds(my_inf: f64, m_op: f64, d: usize, c: f64) -> bool {
    my_inf <= c * m_op * (d as f64).powf(-0.375)
}

pub fn infty_norm_event(d: usize, n: usize, trials: u64, master_seed: u64, identity_operator: bool) -> Result<InftyNormReport> {
    if n < 2 || d < 2 || trials == 0 {
        return Err(Error::Precondition("infty-norm event needs n >= 2, d >= 2, trials >= 1".into()));
    }
    let expected_r = expected_truncated_qtilde(d)?;
    let outcomes: Vec<Option<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::for_purpose(master_seed, Purpose::InftyNorm, t as u32).rng();
            let cloud = sample_gaussian_cloud_with(d, n, &mut rng);
            let mut norms = cloud.norms_sq().to_vec();
            condition_norms(&mut norms, d, &mut rng);
            let y = centered_weights(&norms, expected_r);
            if identity_operator {
                Ok(Some((y.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0)))
            } else {
                let theta = kernel_gram_of_directions(cloud.directions()).theta;
                match infty_norm_statistic(&theta, &y) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::NotPositiveDefinite { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let failed = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let frequencies = INFTY_NORM_CONSTANTS
        .iter()
        .map(|&c| {
            outcomes.iter().filter(|o| matches!(o, Some((a, b)) if infty_event_holds(*a, *b, d, c))).count() as f64
                / trials as f64
        })
        .collect();
    Ok(InftyNormReport {
        d,
        n,
        trials,
        identity_operator,
        constants: INFTY_NORM_CONSTANTS.to_vec(),
        frequencies,
        miss_bound: (2.0 * n as f64 * (-(d as f64).powf(0.25)).exp()).min(1.0),
        failed_factorizations: failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversePerturbation {
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `‖A⁻¹ − B⁻¹‖_op` with `ε ‖B⁻¹‖² / (1 − ε ‖B⁻¹‖)`, `ε = ‖A − B‖_op`.
pub fn inverse_perturbation_check(a: &SymMatrix, b: &SymMatrix) -> Result<InversePerturbation> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidShape(format!("A is {} but B is {}", a.dim(), b.dim())));
    }
    let (b_min, _) = sym_eig_extremes(b)?;
    if b_min <= 0.0 {
        return Err(Error::Domain(format!("B is not positive definite (λ_min = {b_min:e})")));
    }
    let eps = op_norm(&a.sub(b))?;
    if eps >= b_min {
        return Err(Error::Domain(format!("‖A − B‖ = {eps:e} is not below λ_min(B) = {b_min:e}")));
    }
    let a_inv = Cholesky::factor(a).map_err(|e| Error::Domain(format!("A not invertible: {e}")))?.inverse();
    let b_inv = Cholesky::factor(b).map_err(|e| Error::Domain(format!("B not invertible: {e}")))?.inverse();
    let lhs = op_norm(&a_inv.sub(&b_inv))?;
    let b_inv_norm = 1.0 / b_min;
    let rhs = eps * b_inv_norm * b_inv_norm / (1.0 - eps * b_inv_norm);
    Ok(InversePerturbation { eps, lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// A random admissible pair: `B = G Gᵀ/m + δ I` and `A = B + E` with
/// `‖E‖_op = ρ λ_min(B)`, `ρ ∈ (0, 1)`.
pub fn random_admissible_pair<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<(SymMatrix, SymMatrix)> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let delta: f64 = rng.random_range(0.05..1.0);
    let b = SymMatrix::gram_of_rows(&g).scale(1.0 / dim as f64).shift_diagonal(delta);
    let e_raw = SymMatrix::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let e_norm = op_norm(&e_raw)?;
    let (b_min, _) = sym_eig_extremes(&b)?;
    let rho: f64 = rng.random_range(0.01..0.99);
    let a = b.add(&e_raw.scale(rho * b_min / e_norm));
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversePerturbationSweep {
    pub pairs: u64,
    pub holds: u64,
    pub worst_ratio: f64,
    pub checks: Vec<InversePerturbation>,
}

/// Runs the check on `pairs` random admissible pairs of size up to `max_dim`.
pub fn inverse_perturbation_sweep(pairs: u64, max_dim: usize, master_seed: u64) -> Result<InversePerturbationSweep> {
    let checks: Vec<InversePerturbation> = (0..pairs)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::for_purpose(master_seed, Purpose::InversePerturbation, t as u32).rng();
            let dim = rng.random_range(1..=max_dim.max(1));
            let (a, b) = random_admissible_pair(dim, &mut rng)?;
            inverse_perturbation_check(&a, &b)
        })
        .collect::<Result<_>>()?;
    Ok(InversePerturbationSweep {
        pairs,
        holds: checks.iter().filter(|c| c.holds).count() as u64,
        worst_ratio: checks.iter().map(|c| if c.rhs > 0.0 { c.lhs / c.rhs } else { 0.0 }).fold(0.0, f64::max),
        checks,
    })
}
