//! Identity-perturbation ellipsoid fitting.
//!
//! The candidate is `Σ = I_d + Σ_i q_i x_i x_iᵀ`. Requiring `x_iᵀ Σ x_i = 1`
//! for every point gives `D Θ D q = 1 − D 1` with `D = diag(‖x_i‖²)` and the
//! kernel Gram matrix `Θ_ij = ⟨ω_i, ω_j⟩²`, so `q = D⁻¹ Θ⁻¹ (D⁻¹ 1 − 1)`.
//! The fit succeeds when the interpolation residuals vanish and Σ is PSD.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cloud::{sample_gaussian_cloud, PointCloud, MIN_NORM_SQ};
use crate::error::{Error, Result};
use crate::flatten::{flat_len, flatten_outer};
use crate::linalg::{op_norm, spd_solve, sym_eig_extremes, sym_eigenvalues, SymMatrix};
use crate::rng::{Purpose, RandomStream};

pub const DEFAULT_TOL_RESIDUAL: f64 = 1e-8;
pub const DEFAULT_TOL_PSD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub residual: f64,
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: DEFAULT_TOL_RESIDUAL, psd: DEFAULT_TOL_PSD }
    }
}

/// Θ with `Θ_ij = ⟨ω_i, ω_j⟩²`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGram {
    pub theta: SymMatrix,
}

impl KernelGram {
    pub fn dim(&self) -> usize {
        self.theta.dim()
    }
}

pub fn kernel_gram(cloud: &PointCloud) -> KernelGram {
    kernel_gram_of_directions(cloud.directions())
}

/// Kernel Gram matrix of unit rows. The diagonal is pinned to exactly 1.
pub fn kernel_gram_of_directions(directions: &DMatrix<f64>) -> KernelGram {
    let inner = directions * directions.transpose();
    let theta = SymMatrix::from_fn(directions.nrows(), |i, j| {
        if i == j {
            1.0
        } else {
            let c = inner[(i, j)];
            c * c
        }
    });
    KernelGram { theta }
}

/// `E Θ = (1 − 1/d) I_n + (1/d) 1 1ᵀ`.
pub fn expected_kernel_gram(n: usize, d: usize) -> SymMatrix {
    assert!(n >= 1 && d >= 1);
    let inv_d = 1.0 / d as f64;
    SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { inv_d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    ThetaNotPd,
    PsdViolation,
    ResidualViolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub q: DVector<f64>,
    pub sigma: SymMatrix,
    pub residual_max: f64,
    pub lambda_min_sigma: f64,
    pub success: bool,
    pub theta_inv_op_norm: Option<f64>,
}

impl FitResult {
    pub fn failure_reason(&self, tol: &Tolerances) -> FailureReason {
        if self.success {
            FailureReason::None
        } else if self.residual_max > tol.residual {
            FailureReason::ResidualViolation
        } else {
            FailureReason::PsdViolation
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitVerdict {
    pub success: bool,
    pub residual_max: f64,
    pub lambda_min: f64,
}

/// `q̃ = D⁻¹ 1 − 1`.
pub fn qtilde(cloud: &PointCloud) -> Result<Vec<f64>> {
    cloud
        .norms_sq()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d < MIN_NORM_SQ {
                Err(Error::DegenerateInput(format!("d_{i} = {d:e}")))
            } else {
                Ok(1.0 / d - 1.0)
            }
        })
        .collect()
}

/// `I_d + Σ q_i x_i x_iᵀ`.
pub fn assemble_sigma(cloud: &PointCloud, q: &[f64]) -> SymMatrix {
    SymMatrix::weighted_outer_sum(cloud.points(), q).shift_diagonal(1.0)
}

/// Checks an arbitrary candidate Σ against the fitting constraints.
pub fn check_fit(sigma: &SymMatrix, cloud: &PointCloud, tol: &Tolerances) -> Result<FitVerdict> {
    if sigma.dim() != cloud.dim() {
        return Err(Error::InvalidShape(format!(
            "sigma is {0}x{0} but points live in dimension {1}",
            sigma.dim(),
            cloud.dim()
        )));
    }
    let residual_max = residual_max(sigma, cloud);
    let (lambda_min, _) = sym_eig_extremes(sigma)?;
    Ok(FitVerdict {
        success: residual_max <= tol.residual && lambda_min >= -tol.psd,
        residual_max,
        lambda_min,
    })
}

fn residual_max(sigma: &SymMatrix, cloud: &PointCloud) -> f64 {
    let sx = cloud.points() * sigma.as_matrix();
    (0..cloud.len())
        .map(|i| (sx.row(i).dot(&cloud.points().row(i)) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Runs the ansatz end to end. A singular Θ or degenerate norm is reported
/// as an error so that callers can record the trial as failed.
pub fn solve_identity_perturbation(cloud: &PointCloud, tol: &Tolerances) -> Result<FitResult> {
    solve_with_options(cloud, tol, false)
}

/// As [`solve_identity_perturbation`], optionally also computing `‖Θ⁻¹‖_op`
/// (an extra n×n eigenvalue problem).
pub fn solve_with_options(cloud: &PointCloud, tol: &Tolerances, theta_inverse_norm: bool) -> Result<FitResult> {
    let qt = qtilde(cloud)?;
    let gram = kernel_gram(cloud);
    let w = spd_solve(&gram.theta, &DVector::from_vec(qt))?;
    let q = DVector::from_fn(cloud.len(), |i, _| w[i] / cloud.norms_sq()[i]);
    let sigma = assemble_sigma(cloud, q.as_slice());
    let verdict = check_fit(&sigma, cloud, tol)?;
    let theta_inv_op_norm = if theta_inverse_norm {
        let vals = sym_eigenvalues(&gram.theta)?;
        Some(1.0 / vals[0])
    } else {
        None
    };
    Ok(FitResult {
        q,
        sigma,
        residual_max: verdict.residual_max,
        lambda_min_sigma: verdict.lambda_min,
        success: verdict.success,
        theta_inv_op_norm,
    })
}

/// Rank of the n×p constraint matrix with rows `flatten(x_i x_iᵀ)`, using a
/// singular-value cutoff of `1e-10 · σ_max`.
pub fn constraint_rank(cloud: &PointCloud) -> usize {
    let (n, d) = (cloud.len(), cloud.dim());
    let p = flat_len(d);
    let mut rows = DMatrix::zeros(n, p);
    for i in 0..n {
        let x: Vec<f64> = cloud.points().row(i).iter().copied().collect();
        rows.row_mut(i).copy_from_slice(flatten_outer(&x).coords());
    }
    let sv = rows.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

/// One Monte Carlo trial of the ansatz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub d: usize,
    pub n: usize,
    pub trial_index: u32,
    pub success: bool,
    pub lambda_min_sigma: f64,
    pub residual_max: f64,
    pub failure_reason: FailureReason,
}

pub fn trial_stream(master_seed: u64, trial_index: u32) -> RandomStream {
    RandomStream::for_purpose(master_seed, Purpose::FitTrial, trial_index)
}

/// Samples the cloud for `(master_seed, trial_index)` and fits it.
pub fn fit_trial(d: usize, n: usize, master_seed: u64, trial_index: u32, tol: &Tolerances) -> TrialRecord {
    let cloud = sample_gaussian_cloud(d, n, &trial_stream(master_seed, trial_index));
    fit_trial_on(&cloud, trial_index, tol).0
}

/// Fits a given cloud and also returns the full result when one exists.
pub fn fit_trial_on(cloud: &PointCloud, trial_index: u32, tol: &Tolerances) -> (TrialRecord, Option<FitResult>) {
    let (d, n) = (cloud.dim(), cloud.len());
    match solve_identity_perturbation(cloud, tol) {
        Ok(fit) => {
            let record = TrialRecord {
                d,
                n,
                trial_index,
                success: fit.success,
                lambda_min_sigma: fit.lambda_min_sigma,
                residual_max: fit.residual_max,
                failure_reason: fit.failure_reason(tol),
            };
            (record, Some(fit))
        }
        Err(_) => (
            TrialRecord {
                d,
                n,
                trial_index,
                success: false,
                lambda_min_sigma: f64::NAN,
                residual_max: f64::NAN,
                failure_reason: FailureReason::ThetaNotPd,
            },
            None,
        ),
    }
}

/// `λ_min(Σ_i q_i x_i x_iᵀ)`, the perturbation alone; success is equivalent
/// to this being at least −1.
pub fn perturbation_lambda_min(cloud: &PointCloud, q: &[f64]) -> Result<f64> {
    Ok(sym_eig_extremes(&SymMatrix::weighted_outer_sum(cloud.points(), q))?.0)
}

/// `‖Θ − E Θ‖_op`.
pub fn gram_deviation_norm(gram: &KernelGram, d: usize) -> Result<f64> {
    op_norm(&gram.theta.sub(&expected_kernel_gram(gram.dim(), d)))
}
