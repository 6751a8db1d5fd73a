//! Truncated and centered norm weights.
//!
//! `q̃_i = 1/d_i − 1` with `d_i = ‖x_i‖² ~ χ²_d/d`. On the event `A` that every
//! `|q̃_i| ≤ 1`, `r_i = q̃_i` and `y_i = r_i − E r_i`. Since `q̃ ≥ −1` always,
//! `A_i` reduces to `χ²_d ≥ d/2`, and `E r` is a conditional expectation
//! against the chi-square density, evaluated by quadrature.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::quadrature::integrate;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fitter;

pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedWeights {
    pub q_tilde: Vec<f64>,
    /// Event A: all `|q̃_i| ≤ 1`.
    pub truncated_ok: bool,
    pub r: Vec<f64>,
    pub expected_r: f64,
    pub y: Vec<f64>,
}

pub fn qtilde(cloud: &PointCloud) -> Result<Vec<f64>> {
    fitter::qtilde(cloud)
}

fn chi2_log_density(k: f64, x: f64) -> f64 {
    (0.5 * k - 1.0) * x.ln() - 0.5 * x - 0.5 * k * std::f64::consts::LN_2 - ln_gamma(0.5 * k)
}

/// `E[d/χ²_d − 1 | d/χ²_d − 1 ≤ 1]`.
pub fn expected_truncated_qtilde(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::Precondition("dimension must be positive".into()));
    }
    let k = d as f64;
    let lo = k / 2.0;
    let hi = k + 60.0 * (2.0 * k).sqrt() + 100.0;
    let density = |x: f64| chi2_log_density(k, x).exp();
    // Split at the mode so that the adaptive rule sees the peak early.
    let mode = (k - 2.0).max(lo);
    let mut mass = 0.0;
    let mut first = 0.0;
    for (a, b) in [(lo, mode), (mode, hi)] {
        if b > a {
            mass += integrate(density, a, b, QUADRATURE_TOL)?;
            first += integrate(|x| (k / x - 1.0) * density(x), a, b, QUADRATURE_TOL)?;
        }
    }
    if mass <= 0.0 {
        return Err(Error::Numeric(format!("conditioning event has zero mass for d = {d}")));
    }
    Ok(first / mass)
}

pub fn truncate_center(q_tilde: &[f64], d: usize) -> Result<TruncatedWeights> {
    if let Some(i) = q_tilde.iter().position(|&v| !(v >= -1.0)) {
        return Err(Error::Precondition(format!("q̃_{i} = {} is below -1", q_tilde[i])));
    }
    let expected_r = expected_truncated_qtilde(d)?;
    Ok(from_parts(q_tilde.to_vec(), expected_r))
}

fn from_parts(q_tilde: Vec<f64>, expected_r: f64) -> TruncatedWeights {
    let truncated_ok = q_tilde.iter().all(|v| v.abs() <= 1.0);
    let r = q_tilde.clone();
    let y = r.iter().map(|v| v - expected_r).collect();
    TruncatedWeights { q_tilde, truncated_ok, r, expected_r, y }
}

/// Draws `χ²_d/d` from `d` standard normals.
pub fn sample_norm_sq<R: Rng + ?Sized>(d: usize, rng: &mut R) -> f64 {
    let s: f64 = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
    s / d as f64
}

/// Conditions a vector of norms on the event `A` by redrawing each offending
/// coordinate. Norms are independent of directions, so this samples `y` given
/// `A` without touching the directions.
pub fn condition_norms<R: Rng + ?Sized>(norms_sq: &mut [f64], d: usize, rng: &mut R) {
    for v in norms_sq.iter_mut() {
        while 1.0 / *v - 1.0 > 1.0 {
            *v = sample_norm_sq(d, rng);
        }
    }
}

/// Centered weights `y` for a set of norms already conditioned on `A`.
pub fn centered_weights(norms_sq: &[f64], expected_r: f64) -> Vec<f64> {
    norms_sq.iter().map(|v| 1.0 / v - 1.0 - expected_r).collect()
}
