//! Flattened rank-one ensembles and their moments.
//!
//! For unit `x`, `X = flatten(x xᵀ)` has `‖X‖ = 1`, its centered version
//! `Y = X − flatten(I)/d` is orthogonal to `flatten(I)`, and
//! `E[Y Yᵀ] = 2/(d(d+2)) · P` with `P` the projector onto `flatten(I)^⊥`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{sample_sphere_rows, sample_sphere_with};
use crate::error::{Error, Result};
use crate::flatten::{flat_len, flatten, flatten_outer};
use crate::fitter::kernel_gram_of_directions;
use crate::linalg::{op_norm, SymMatrix};
use crate::rng::{Purpose, RandomStream};
use crate::stats::MeanEstimate;

/// Flattened ensemble built from unit vectors (the rows of `directions`).
#[derive(Debug, Clone)]
pub struct FlattenedEnsemble {
    pub d: usize,
    /// Rows `X_i`.
    pub x: DMatrix<f64>,
    /// Rows `Y_i = X_i − flatten(I)/d`.
    pub y: DMatrix<f64>,
    /// `I_p − (1/d) flatten(I) flatten(I)ᵀ`.
    pub projector: SymMatrix,
    /// Rows `V_i = P Y_i`.
    pub v: DMatrix<f64>,
    /// Gram matrix of the `Y_i`.
    pub h: SymMatrix,
    pub sigma_scale: f64,
}

impl FlattenedEnsemble {
    pub fn build(directions: &DMatrix<f64>) -> Self {
        let (n, d) = directions.shape();
        let p = flat_len(d);
        let id = flatten(&SymMatrix::identity(d));
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            let row: Vec<f64> = directions.row(i).iter().copied().collect();
            x.row_mut(i).copy_from_slice(flatten_outer(&row).coords());
        }
        let shift = DVector::from_column_slice(id.coords()) / d as f64;
        let y = DMatrix::from_fn(n, p, |i, k| x[(i, k)] - shift[k]);
        let idv = id.to_dvector();
        let projector = SymMatrix::from_fn(p, |a, b| {
            let e = if a == b { 1.0 } else { 0.0 };
            e - idv[a] * idv[b] / d as f64
        });
        let v = &y * projector.as_matrix();
        let h = SymMatrix::gram_of_rows(&y);
        Self { d, x, y, projector, v, h, sigma_scale: sigma_scale(d) }
    }

    /// Largest violation of each exact identity, given the source directions.
    pub fn identity_errors(&self, directions: &DMatrix<f64>) -> IdentityErrors {
        let d = self.d as f64;
        let n = self.x.nrows();
        let idv = flatten(&SymMatrix::identity(self.d)).to_dvector();
        let mut e = IdentityErrors::default();
        for i in 0..n {
            e.x_norm = e.x_norm.max((self.x.row(i).norm() - 1.0).abs());
            e.y_norm_sq = e.y_norm_sq.max((self.y.row(i).norm_squared() - (1.0 - 1.0 / d)).abs());
            e.y_orthogonal = e.y_orthogonal.max(self.y.row(i).transpose().dot(&idv).abs());
        }
        let vgram = &self.v * self.v.transpose();
        e.v_gram = (vgram - self.h.as_matrix()).amax();
        let theta = kernel_gram_of_directions(directions).theta;
        let shifted = self.h.as_matrix().add_scalar(1.0 / d);
        e.theta_split = (shifted - theta.as_matrix()).amax();
        e
    }
}

/// `(p − 1) · 2/(d(d+2))`, which equals `1 − 1/d`.
pub fn sigma_scale(d: usize) -> f64 {
    let p = flat_len(d) as f64;
    let d = d as f64;
    (p - 1.0) * 2.0 / (d * (d + 2.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityErrors {
    pub x_norm: f64,
    pub y_norm_sq: f64,
    pub y_orthogonal: f64,
    pub v_gram: f64,
    pub theta_split: f64,
}

impl IdentityErrors {
    pub fn max(&self, other: &Self) -> Self {
        Self {
            x_norm: self.x_norm.max(other.x_norm),
            y_norm_sq: self.y_norm_sq.max(other.y_norm_sq),
            y_orthogonal: self.y_orthogonal.max(other.y_orthogonal),
            v_gram: self.v_gram.max(other.v_gram),
            theta_split: self.theta_split.max(other.theta_split),
        }
    }

    /// `‖X‖ = 1` and orthogonality to 1e-12, the rest to 1e-10.
    pub fn within_tolerance(&self) -> bool {
        self.x_norm <= 1e-12 && self.y_orthogonal <= 1e-12 && self.v_gram <= 1e-12 && self.y_norm_sq <= 1e-10 && self.theta_split <= 1e-10
    }
}

/// `3/(d(d+2))`, the fourth moment of one coordinate of a uniform unit vector.
pub fn sphere_fourth_moment(d: usize) -> f64 {
    let d = d as f64;
    3.0 / (d * (d + 2.0))
}

/// Sample mean of `⟨ω, a⟩⁴` for a fixed random `a`.
pub fn fourth_moment_estimate(d: usize, trials: u64, seed: u64) -> MeanEstimate {
    let a = sample_sphere_with(d, &mut RandomStream::for_purpose(seed, Purpose::Auxiliary, 1).rng());
    let xs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let w = sample_sphere_with(d, &mut RandomStream::for_purpose(seed, Purpose::Moments, t as u32).rng());
            w.dot(&a).powi(4)
        })
        .collect();
    MeanEstimate::from_samples(&xs)
}

/// Sample mean of `⟨ω, ω'⟩²` over independent pairs; the exact value is `1/d`.
pub fn pair_square_estimate(d: usize, trials: u64, seed: u64) -> MeanEstimate {
    let xs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::for_purpose(seed, Purpose::Moments, (1 << 31) | t as u32).rng();
            let a = sample_sphere_with(d, &mut rng);
            let b = sample_sphere_with(d, &mut rng);
            a.dot(&b).powi(2)
        })
        .collect();
    MeanEstimate::from_samples(&xs)
}

/// Sample mean of `q̃ = d/χ²_d − 1`; the exact value is `2/(d−2)`.
pub fn qtilde_mean_estimate(d: usize, trials: u64, seed: u64) -> MeanEstimate {
    MeanEstimate::from_samples(&super::tails::qtilde_samples(d, trials, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub d: usize,
    pub trials: u64,
    pub sigma_scale: f64,
    /// `‖(p−1)·2/(d(d+2)) I − I‖_op`, which should equal `1/d`.
    pub sigma_minus_identity: f64,
    /// `‖Ê[Y Yᵀ] − 2/(d(d+2)) P‖_op`.
    pub covariance_error: f64,
    /// Frobenius standard error of the empirical covariance.
    pub covariance_se: f64,
    pub identity_errors: IdentityErrors,
    pub fourth_moment: MeanEstimate,
    pub fourth_moment_exact: f64,
    pub pair_square: MeanEstimate,
    pub pair_square_exact: f64,
}

impl MomentReport {
    pub fn covariance_ok(&self) -> bool {
        self.covariance_error <= 5.0 * self.covariance_se
    }

    pub fn passes(&self) -> bool {
        let d = self.d as f64;
        self.covariance_ok()
            && self.identity_errors.within_tolerance()
            && self.fourth_moment.within(self.fourth_moment_exact, 5.0)
            && self.pair_square.within(self.pair_square_exact, 5.0)
            && (self.sigma_scale - (1.0 - 1.0 / d)).abs() <= 1e-14
            && (self.sigma_minus_identity - 1.0 / d).abs() <= 1e-14
    }
}

const ENSEMBLE_BATCH: usize = 200;

pub fn moment_suite(d: usize, trials: u64, seed: u64) -> Result<MomentReport> {
    if !(3..=30).contains(&d) {
        return Err(Error::Precondition(format!("moment suite needs d in [3, 30], got {d}")));
    }
    if trials < 2 {
        return Err(Error::Precondition("moment suite needs at least two samples".into()));
    }
    let p = flat_len(d);
    let batches = (trials as usize).div_ceil(ENSEMBLE_BATCH);
    let partial: Vec<(DMatrix<f64>, IdentityErrors)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = ENSEMBLE_BATCH.min(trials as usize - b * ENSEMBLE_BATCH);
            let mut rng = RandomStream::for_purpose(seed, Purpose::Moments, b as u32).rng();
            let dirs = sample_sphere_rows(d, size, &mut rng);
            let ens = FlattenedEnsemble::build(&dirs);
            (ens.y.transpose() * &ens.y, ens.identity_errors(&dirs))
        })
        .collect();
    let mut second = DMatrix::zeros(p, p);
    let mut errors = IdentityErrors::default();
    for (s, e) in &partial {
        second += s;
        errors = errors.max(e);
    }
    let n = trials as f64;
    second /= n;
    let empirical = SymMatrix::from_lower(&second)?;
    let ens0 = FlattenedEnsemble::build(&DMatrix::from_fn(1, d, |_, k| if k == 0 { 1.0 } else { 0.0 }));
    let c = 2.0 / (d as f64 * (d as f64 + 2.0));
    let target = ens0.projector.scale(c);
    let covariance_error = op_norm(&empirical.sub(&target))?;
    // Σ_ab Var(Y_a Y_b) = E‖Y‖⁴ − ‖E[YYᵀ]‖_F², with ‖Y‖² = 1 − 1/d exactly.
    let y4 = (1.0 - 1.0 / d as f64).powi(2);
    let covariance_se = ((y4 - empirical.frobenius_norm().powi(2)).max(0.0) / n).sqrt();
    let scale = sigma_scale(d);
    Ok(MomentReport {
        d,
        trials,
        sigma_scale: scale,
        sigma_minus_identity: (scale - 1.0).abs(),
        covariance_error,
        covariance_se,
        identity_errors: errors,
        fourth_moment: fourth_moment_estimate(d, trials, seed),
        fourth_moment_exact: sphere_fourth_moment(d),
        pair_square: pair_square_estimate(d, trials, seed),
        pair_square_exact: 1.0 / d as f64,
    })
}

/// Random trace-zero symmetric matrix of unit Frobenius norm.
pub fn random_trace_zero<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SymMatrix {
    let g = SymMatrix::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let centered = g.shift_diagonal(-g.trace() / d as f64);
    let norm = centered.frobenius_norm();
    centered.scale(1.0 / norm)
}

/// `(E|⟨V, t⟩|^k)^{1/k}` for each `k`, estimated from `samples` sphere draws.
/// `t` must be trace-zero.
pub fn projected_moments(t: &SymMatrix, ks: &[u32], samples: u64, seed: u64) -> Result<Vec<f64>> {
    let d = t.dim();
    if t.trace().abs() > 1e-12 * t.frobenius_norm().max(1.0) {
        return Err(Error::Precondition(format!("direction has trace {:e}, expected zero", t.trace())));
    }
    let tf = flatten(t);
    let idv = flatten(&SymMatrix::identity(d));
    let shift: Vec<f64> = idv.coords().iter().map(|v| v / d as f64).collect();
    let inner: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let w = sample_sphere_with(d, &mut RandomStream::for_purpose(seed, Purpose::MomentGrowth, s as u32).rng());
            let x = flatten_outer(w.as_slice());
            // ⟨P Y, t⟩ = ⟨Y, t⟩ because t ⊥ flatten(I).
            x.coords().iter().zip(&shift).zip(tf.coords()).map(|((xv, sv), tv)| (xv - sv) * tv).sum()
        })
        .collect();
    Ok(ks
        .iter()
        .map(|&k| {
            let m = inner.iter().map(|v: &f64| v.abs().powi(k as i32)).sum::<f64>() / samples as f64;
            m.powf(1.0 / k as f64)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentGrowthReport {
    pub d: usize,
    pub ks: Vec<u32>,
    /// Largest `L̂(k) = d ‖⟨V, t⟩‖_k / (k ‖t‖)` over the sampled directions.
    pub l_hat: Vec<f64>,
    pub num_directions: usize,
    pub samples: u64,
}

impl MomentGrowthReport {
    /// `max_k L̂(k) / min_k L̂(k)`.
    pub fn spread(&self) -> f64 {
        let hi = self.l_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.l_hat.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Exact `L̂(2)`: `d √(2/(d(d+2))) / 2`.
pub fn l_hat_two(d: usize) -> f64 {
    let df = d as f64;
    df * (2.0 / (df * (df + 2.0))).sqrt() / 2.0
}

pub fn projected_moment_growth(d: usize, k_max: u32, num_directions: usize, samples: u64, seed: u64) -> Result<MomentGrowthReport> {
    if !(2..=12).contains(&k_max) {
        return Err(Error::Precondition(format!("k_max must be in [2, 12], got {k_max}")));
    }
    if d < 2 || num_directions == 0 || samples == 0 {
        return Err(Error::Precondition("need d >= 2, at least one direction and one sample".into()));
    }
    let ks: Vec<u32> = (2..=k_max).step_by(2).collect();
    let mut l_hat = vec![0.0f64; ks.len()];
    for j in 0..num_directions {
        let mut rng = RandomStream::for_purpose(seed, Purpose::Auxiliary, 100 + j as u32).rng();
        let t = random_trace_zero(d, &mut rng);
        let norms = projected_moments(&t, &ks, samples, seed.wrapping_add(j as u64 + 1))?;
        for (slot, (&k, m)) in l_hat.iter_mut().zip(ks.iter().zip(norms)) {
            *slot = slot.max(d as f64 * m / (k as f64 * t.frobenius_norm()));
        }
    }
    Ok(MomentGrowthReport { d, ks, l_hat, num_directions, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_scale_exact() {
        for d in 2..40 {
            assert!((sigma_scale(d) - (1.0 - 1.0 / d as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn ensemble_identities() {
        let dirs = sample_sphere_rows(6, 30, &mut RandomStream::new(1, 1).rng());
        let ens = FlattenedEnsemble::build(&dirs);
        assert!(ens.identity_errors(&dirs).within_tolerance());
    }

    #[test]
    fn projector_is_idempotent() {
        let ens = FlattenedEnsemble::build(&sample_sphere_rows(4, 2, &mut RandomStream::new(2, 2).rng()));
        let p = ens.projector.as_matrix();
        assert!((p * p - p).amax() < 1e-14);
        assert!((ens.projector.trace() - (flat_len(4) as f64 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn identity_direction_rejected() {
        let t = SymMatrix::identity(5).scale(1.0 / 5f64.sqrt());
        assert!(matches!(projected_moments(&t, &[2], 10, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn trace_zero_sampler() {
        let t = random_trace_zero(7, &mut RandomStream::new(3, 3).rng());
        assert!(t.trace().abs() < 1e-12);
        assert!((t.frobenius_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suite_domain() {
        assert!(moment_suite(2, 100, 1).is_err());
        assert!(moment_suite(31, 100, 1).is_err());
    }
}
