//! Tail curves: empirical survival of a statistic against a closed-form bound.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_trials, sorted_grid, TailCurve};
use crate::cloud::{sample_sphere_rows, sample_sphere_with};
use crate::error::{Error, Result};
use crate::linalg::{op_norm, SymMatrix};
use crate::rng::{Purpose, RandomStream};

/// Default `C` in `P[|⟨ω, a⟩| ≥ t] ≤ 2 exp(−C d t²)`.
pub const SPHERE_SUBGAUSSIAN_C: f64 = 0.5;
/// Default `C` of the spherical Hanson–Wright bound.
pub const HANSON_WRIGHT_C: f64 = 0.125;
/// Default Weibull exponent for the truncated fourth-moment sum.
pub const WEIBULL_Q: f64 = 0.6;
/// Default `C(q)` of the truncated fourth-moment sum bound.
pub const WEIBULL_C: f64 = 0.125;

fn per_trial<T: Send>(trials: u64, seed: u64, purpose: Purpose, f: impl Fn(&mut rand_chacha::ChaCha8Rng) -> T + Sync) -> Vec<T> {
    (0..trials)
        .into_par_iter()
        .map(|t| f(&mut RandomStream::for_purpose(seed, purpose, t as u32).rng()))
        .collect()
}

/// Poisson tail bound `(eλ/x)^x e^{−λ}` for `x > λ`, and 1 otherwise.
pub fn poisson_tail_bound(lambda: f64, x: f64) -> f64 {
    if x <= lambda || x <= 0.0 {
        return 1.0;
    }
    (x * (1.0 + (lambda / x).ln()) - lambda).exp()
}

/// `λ = 4n exp(−C d η²)`.
pub fn s_eta_lambda(d: usize, n: usize, eta: f64, c: f64) -> f64 {
    4.0 * n as f64 * (-c * d as f64 * eta * eta).exp()
}

/// `|S(η)| = #{i : |⟨ω_i, a⟩| > η}` for `n` fresh directions and a fresh `a`.
pub fn s_eta_samples(d: usize, n: usize, eta: f64, trials: u64, seed: u64) -> Vec<f64> {
    per_trial(trials, seed, Purpose::SEta, |rng| {
        let a = sample_sphere_with(d, rng);
        let dirs = sample_sphere_rows(d, n, rng);
        (dirs * &a).iter().filter(|v| v.abs() > eta).count() as f64
    })
}

pub fn s_eta_tail(d: usize, n: usize, eta: f64, thresholds: &[f64], trials: u64, seed: u64, c: f64) -> Result<TailCurve> {
    require_trials(trials)?;
    if !(eta >= 0.0) {
        return Err(Error::Precondition(format!("eta must be non-negative, got {eta}")));
    }
    let grid = sorted_grid(thresholds)?;
    let lambda = s_eta_lambda(d, n, eta, c);
    let stats = s_eta_samples(d, n, eta, trials, seed);
    Ok(TailCurve::from_statistics(&stats, &grid, |x| poisson_tail_bound(lambda, x)))
}

/// `2 exp(−C min(n d^{2/q} η^{4/q} v² / (d⁴ η⁸), n^q d^{1−2q} η^{2−4q} v^q))`.
pub fn weibull_sum_bound(d: usize, n: usize, eta: f64, v: f64, q: f64, c: f64) -> f64 {
    let (d, n) = (d as f64, n as f64);
    let gauss = n * d.powf(2.0 / q) * eta.powf(4.0 / q) * v * v / (d.powi(4) * eta.powi(8));
    let weibull = n.powf(q) * d.powf(1.0 - 2.0 * q) * eta.powf(2.0 - 4.0 * q) * v.max(0.0).powf(q);
    2.0 * (-c * gauss.min(weibull)).exp()
}

/// `Σ_{i ∉ S(η)} ⟨ω_i, a⟩⁴`, the fourth-moment sum over directions with
/// `|⟨ω_i, a⟩| ≤ η`.
pub fn weibull_sum_samples(d: usize, n: usize, eta: f64, trials: u64, seed: u64) -> Vec<f64> {
    per_trial(trials, seed, Purpose::WeibullSum, |rng| {
        let a = sample_sphere_with(d, rng);
        let dirs = sample_sphere_rows(d, n, rng);
        (dirs * &a).iter().filter(|v| v.abs() <= eta).map(|v| v.powi(4)).sum()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub q: f64,
    pub c: f64,
}

impl Default for WeibullParams {
    fn default() -> Self {
        Self { q: WEIBULL_Q, c: WEIBULL_C }
    }
}

/// Tail of the truncated fourth-moment sum. The curve's thresholds are the
/// `v` values; the statistic is compared with `(n/d²)(3 + v)`.
pub fn weibull_sum_tail(d: usize, n: usize, eta: f64, v_grid: &[f64], trials: u64, seed: u64, params: WeibullParams) -> Result<TailCurve> {
    require_trials(trials)?;
    if !(eta > 0.0) {
        return Err(Error::Precondition(format!("eta must be positive, got {eta}")));
    }
    let grid = sorted_grid(v_grid)?;
    let scale = n as f64 / (d as f64).powi(2);
    let stats: Vec<f64> = weibull_sum_samples(d, n, eta, trials, seed).into_iter().map(|s| s / scale - 3.0).collect();
    Ok(TailCurve::from_statistics(&stats, &grid, |v| weibull_sum_bound(d, n, eta, v, params.q, params.c)))
}

/// `|d xᵀ M x − Tr M|` for `x` uniform on the sphere.
pub fn hanson_wright_samples(m: &SymMatrix, trials: u64, seed: u64) -> Vec<f64> {
    let d = m.dim();
    let tr = m.trace();
    per_trial(trials, seed, Purpose::HansonWright, |rng| {
        let x = sample_sphere_with(d, rng);
        (d as f64 * m.quadratic_form(&x) - tr).abs()
    })
}

/// `2 exp(−C min(u²/‖M‖_F², u/‖M‖_op))`.
pub fn hanson_wright_bound(u: f64, frob: f64, op: f64, c: f64) -> f64 {
    if frob == 0.0 {
        return 0.0;
    }
    2.0 * (-c * (u * u / (frob * frob)).min(u / op)).exp()
}

pub fn hanson_wright_tail(m: &SymMatrix, u_grid: &[f64], trials: u64, seed: u64, c: f64) -> Result<TailCurve> {
    require_trials(trials)?;
    let grid = sorted_grid(u_grid)?;
    let frob = m.frobenius_norm();
    let op = op_norm(m)?;
    let stats = hanson_wright_samples(m, trials, seed);
    Ok(TailCurve::from_statistics(&stats, &grid, |u| hanson_wright_bound(u, frob, op, c)))
}

/// `z = (1/d) Σ x_k²` for `x_k` i.i.d. standard normal.
pub fn chi2_samples(d: usize, trials: u64, seed: u64, purpose: Purpose) -> Vec<f64> {
    per_trial(trials, seed, purpose, |rng| {
        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>() / d as f64
    })
}

/// Both chi-square tails against `e^{−u}`; thresholds are the `u` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Tails {
    /// `P[z − 1 ≥ 2√(u/d) + 2u/d]`.
    pub upper: TailCurve,
    /// `P[z − 1 ≤ −2√(u/d)]`.
    pub lower: TailCurve,
}

impl Chi2Tails {
    pub fn passes(&self) -> bool {
        self.upper.passes() && self.lower.passes()
    }

    /// Pointwise maximum of the two tails; passes iff both do.
    pub fn combined(&self) -> TailCurve {
        self.upper.pointwise_max(&self.lower)
    }
}

pub fn chi2_upper_threshold(d: usize, u: f64) -> f64 {
    2.0 * (u / d as f64).sqrt() + 2.0 * u / d as f64
}

pub fn chi2_tail(d: usize, u_grid: &[f64], trials: u64, seed: u64) -> Result<Chi2Tails> {
    require_trials(trials)?;
    if d < 1 {
        return Err(Error::Precondition("d must be positive".into()));
    }
    let grid = sorted_grid(u_grid)?;
    if grid[0] < 0.0 {
        return Err(Error::Precondition("u must be non-negative".into()));
    }
    let z = chi2_samples(d, trials, seed, Purpose::Chi2);
    let n = trials as f64;
    let upper: Vec<f64> = grid
        .iter()
        .map(|&u| {
            let t = chi2_upper_threshold(d, u);
            z.iter().filter(|&&v| v - 1.0 >= t).count() as f64 / n
        })
        .collect();
    let lower: Vec<f64> = grid
        .iter()
        .map(|&u| {
            let t = -2.0 * (u / d as f64).sqrt();
            z.iter().filter(|&&v| v - 1.0 <= t).count() as f64 / n
        })
        .collect();
    let bound: Vec<f64> = grid.iter().map(|u| (-u).exp()).collect();
    Ok(Chi2Tails {
        upper: TailCurve::new(grid.clone(), upper, bound.clone(), trials),
        lower: TailCurve::new(grid, lower, bound, trials),
    })
}

/// `q̃ = 1/z − 1` with `z` as in [`chi2_samples`].
pub fn qtilde_samples(d: usize, trials: u64, seed: u64) -> Vec<f64> {
    chi2_samples(d, trials, seed, Purpose::QTilde).into_iter().map(|z| 1.0 / z - 1.0).collect()
}

/// `P[|q̃| ≥ t]` against `2 exp(−d t²/16)`.
pub fn qtilde_tail(d: usize, t_grid: &[f64], trials: u64, seed: u64) -> Result<TailCurve> {
    require_trials(trials)?;
    let grid = sorted_grid(t_grid)?;
    if grid[0] <= 0.0 || grid[grid.len() - 1] >= 1.0 {
        return Err(Error::Precondition("q̃ thresholds must lie in (0, 1)".into()));
    }
    let stats: Vec<f64> = qtilde_samples(d, trials, seed).into_iter().map(f64::abs).collect();
    Ok(TailCurve::from_statistics(&stats, &grid, |t| 2.0 * (-(d as f64) * t * t / 16.0).exp()))
}

/// Uniform random direction, exposed for callers that need the same `a`.
pub fn random_direction(d: usize, seed: u64) -> nalgebra::DVector<f64> {
    let mut rng = RandomStream::for_purpose(seed, Purpose::Auxiliary, 0).rng();
    sample_sphere_with(d, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_bound_regimes() {
        assert_eq!(poisson_tail_bound(2.0, 1.0), 1.0);
        let b = poisson_tail_bound(0.5, 2.0);
        let expect = (std::f64::consts::E * 0.5 / 2.0f64).powi(2) * (-0.5f64).exp();
        assert!((b - expect).abs() < 1e-15);
    }

    #[test]
    fn s_eta_extremes() {
        let above = s_eta_samples(5, 20, 1.0, 50, 1);
        assert!(above.iter().all(|&s| s == 0.0));
        let zero = s_eta_samples(5, 20, 0.0, 50, 1);
        assert!(zero.iter().all(|&s| s == 20.0));
    }

    #[test]
    fn weibull_tiny_eta_sum_is_zero() {
        let c = weibull_sum_tail(20, 30, 1e-9, &[-2.5, 0.5, 1.0], 200, 3, WeibullParams::default()).unwrap();
        assert!(c.empirical_survival.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn hanson_wright_identity_is_degenerate() {
        let c = hanson_wright_tail(&SymMatrix::identity(6), &[0.5, 1.0, 2.0], 500, 2, HANSON_WRIGHT_C).unwrap();
        assert!(c.empirical_survival.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn chi2_zero_u() {
        let t = chi2_tail(10, &[0.0, 1.0], 1000, 4).unwrap();
        assert_eq!(t.upper.bound_values[0], 1.0);
        assert!(t.passes());
    }

    #[test]
    fn qtilde_rejects_out_of_range() {
        assert!(qtilde_tail(10, &[0.5, 1.0], 10, 1).is_err());
        assert!(qtilde_tail(10, &[0.0, 0.5], 10, 1).is_err());
    }

    #[test]
    fn qtilde_never_below_minus_one() {
        assert!(qtilde_samples(3, 2000, 5).iter().all(|&q| q >= -1.0));
    }

    #[test]
    fn tails_monotone() {
        let c = qtilde_tail(20, &[0.1, 0.3, 0.5, 0.9], 5000, 6).unwrap();
        assert!(c.is_monotone());
        let t = chi2_tail(10, &[0.5, 1.0, 2.0, 4.0], 5000, 7).unwrap();
        assert!(t.upper.is_monotone() && t.lower.is_monotone() && t.combined().is_monotone());
    }
}
