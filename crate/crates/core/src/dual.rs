//! Dual certificates of infeasibility.
//!
//! A vector `z` with `Σ z_i = 0` and `M(z) = Σ z_i x_i x_iᵀ ≺ 0` rules out any
//! fitting ellipsoid: for feasible Σ ⪰ 0, `Tr[Σ M(z)] = Σ z_i = 0`, which is
//! impossible when `M(z)` is negative definite.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fitter::FitResult;
use crate::linalg::{sym_eig_extremes, sym_eigen, SymMatrix};
use crate::rng::RandomStream;

/// `λ_max` must be below `-STRICTNESS` to count as negative definite.
pub const STRICTNESS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub z: Vec<f64>,
    pub sum_violation: f64,
    pub lambda_max: f64,
    pub valid: bool,
}

/// `M(z) = Σ z_i x_i x_iᵀ`.
pub fn dual_matrix(z: &[f64], cloud: &PointCloud) -> SymMatrix {
    SymMatrix::weighted_outer_sum(cloud.points(), z)
}

pub fn certificate_check(z: &[f64], cloud: &PointCloud) -> Result<DualVector> {
    if z.len() != cloud.len() {
        return Err(Error::InvalidShape(format!("z has length {} for {} points", z.len(), cloud.len())));
    }
    let sum_violation = z.iter().sum::<f64>().abs();
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    let l2 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (_, lambda_max) = sym_eig_extremes(&dual_matrix(z, cloud))?;
    let valid = sum_violation <= 1e-10 * l1 && lambda_max < -STRICTNESS && l2 > 0.0;
    Ok(DualVector { z: z.to_vec(), sum_violation, lambda_max, valid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub max_iters: usize,
    pub restarts: usize,
    /// Step size numerator `c` in `c/√k`.
    pub step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { max_iters: 2000, restarts: 8, step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: DualVector,
    /// Running minimum of `λ_max` after each iteration, taken over all restarts.
    pub trace: Vec<f64>,
    pub best_restart: usize,
}

/// Removes the mean and rescales to unit ℓ₂ norm. Returns `None` for the
/// zero vector.
fn project(z: &mut [f64]) -> Option<()> {
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    z.iter_mut().for_each(|v| *v -= mean);
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    z.iter_mut().for_each(|v| *v /= norm);
    Some(())
}

/// Top eigenpair of `M(z)`.
fn top_eigen(z: &[f64], cloud: &PointCloud) -> Result<(f64, DVector<f64>)> {
    let (vals, vecs) = sym_eigen(&dual_matrix(z, cloud))?;
    let last = vals.len() - 1;
    Ok((vals[last], vecs.column(last).into_owned()))
}

struct RestartResult {
    best_z: Vec<f64>,
    best_lambda: f64,
    running_min: Vec<f64>,
}

fn run_restart(cloud: &PointCloud, opts: &SearchOptions, stream: RandomStream) -> Result<RestartResult> {
    let n = cloud.len();
    let mut rng = stream.rng();
    let mut z: Vec<f64> = loop {
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if project(&mut g).is_some() {
            break g;
        }
    };
    let (mut lambda, mut u) = top_eigen(&z, cloud)?;
    let mut best_z = z.clone();
    let mut best_lambda = lambda;
    let mut running_min = Vec::with_capacity(opts.max_iters);
    for k in 1..=opts.max_iters {
        // ∂λ_max(M(z)) ∋ (⟨x_i, u⟩²)_i, projected onto the sum-zero subspace.
        let proj = cloud.points() * &u;
        let mut g: Vec<f64> = proj.iter().map(|v| v * v).collect();
        let mean = g.iter().sum::<f64>() / n as f64;
        g.iter_mut().for_each(|v| *v -= mean);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm > 0.0 {
            let step = opts.step / (k as f64).sqrt() / gnorm;
            let mut next: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            if project(&mut next).is_some() {
                z = next;
                (lambda, u) = top_eigen(&z, cloud)?;
            }
        }
        if lambda < best_lambda {
            best_lambda = lambda;
            best_z.clone_from(&z);
        }
        running_min.push(best_lambda);
    }
    Ok(RestartResult { best_z, best_lambda, running_min })
}

/// Projected subgradient descent on `λ_max(M(z))` over the unit sphere of the
/// sum-zero subspace. Each restart draws from `stream.child(restart)`; the
/// best restart wins, ties going to the lower index.
pub fn certificate_search(cloud: &PointCloud, opts: &SearchOptions, stream: &RandomStream) -> Result<SearchOutcome> {
    if cloud.len() < 2 {
        return Err(Error::Precondition("certificate search needs at least two points".into()));
    }
    if opts.restarts == 0 || opts.max_iters == 0 {
        return Err(Error::Precondition("restarts and max_iters must be positive".into()));
    }
    let results: Vec<RestartResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run_restart(cloud, opts, stream.child(r as u64)))
        .collect::<Result<_>>()?;
    let mut best_restart = 0;
    for (r, res) in results.iter().enumerate() {
        if res.best_lambda < results[best_restart].best_lambda {
            best_restart = r;
        }
    }
    let trace = (0..opts.max_iters)
        .map(|k| results.iter().map(|r| r.running_min[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let best = certificate_check(&results[best_restart].best_z, cloud)?;
    Ok(SearchOutcome { best, trace, best_restart })
}

/// Threshold below which `λ_max(M(z))` counts as a weak-duality violation.
pub fn probe_threshold(z_norm: f64, cloud: &PointCloud) -> f64 {
    let dmax = cloud.norms_sq().iter().copied().fold(0.0, f64::max);
    -1e-8 * z_norm * dmax
}

/// Draws `num_probes` Gaussian sum-zero vectors and counts those with
/// `λ_max(M(z))` strictly below [`probe_threshold`]. A successful fit makes
/// every such count zero.
pub fn weak_duality_probe(cloud: &PointCloud, fit: &FitResult, num_probes: usize, stream: &RandomStream) -> Result<usize> {
    if !fit.success {
        return Err(Error::Precondition("weak duality probe requires a successful fit".into()));
    }
    let n = cloud.len();
    let mut rng = stream.rng();
    let mut violations = 0;
    for _ in 0..num_probes {
        let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        z.iter_mut().for_each(|v| *v -= mean);
        if probe_violates(&z, cloud)? {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Whether a single sum-zero `z` is a strict certificate beyond the probe threshold.
pub fn probe_violates(z: &[f64], cloud: &PointCloud) -> Result<bool> {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (_, lambda_max) = sym_eig_extremes(&dual_matrix(z, cloud))?;
    Ok(lambda_max < probe_threshold(norm, cloud))
}

/// Orthonormal basis of `{z : Σ zᵢ = 0}` in `ℝⁿ` (Helmert vectors).
pub fn sum_zero_basis(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|k| {
            let scale = ((k * (k + 1)) as f64).sqrt();
            (0..n)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / scale,
                    std::cmp::Ordering::Equal => -(k as f64) / scale,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Points on the unit sphere `S^{m-1}` for `m ≤ 3`: `±1`, equally spaced
/// angles, or a Fibonacci lattice.
pub fn sphere_grid(m: usize, points: usize) -> Result<Vec<Vec<f64>>> {
    match m {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => Ok((0..points)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..points)
                .map(|i| {
                    let y = 1.0 - 2.0 * (i as f64 + 0.5) / points as f64;
                    let r = (1.0 - y * y).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), y, r * phi.sin()]
                })
                .collect())
        }
        _ => Err(Error::Precondition(format!("sphere grids are built up to dimension 3, got {m}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridVerdict {
    pub valid: bool,
    pub best: DualVector,
    pub grid_points: usize,
}

/// Exhaustive search for a certificate over a grid of the unit sphere of the
/// sum-zero subspace. Needs `2 ≤ n ≤ 4`.
pub fn grid_oracle(cloud: &PointCloud, points: usize) -> Result<GridVerdict> {
    let n = cloud.len();
    if !(2..=4).contains(&n) {
        return Err(Error::Precondition(format!("grid oracle needs 2 <= n <= 4, got {n}")));
    }
    let basis = sum_zero_basis(n);
    let grid = sphere_grid(n - 1, points)?;
    let lambdas: Vec<(f64, Vec<f64>)> = grid
        .par_iter()
        .map(|c| {
            let z: Vec<f64> = (0..n).map(|i| c.iter().zip(&basis).map(|(ck, b)| ck * b[i]).sum()).collect();
            let (_, hi) = sym_eig_extremes(&dual_matrix(&z, cloud))?;
            Ok((hi, z))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (l, _)) in lambdas.iter().enumerate() {
        if *l < lambdas[best].0 {
            best = i;
        }
    }
    let best = certificate_check(&lambdas[best].1, cloud)?;
    Ok(GridVerdict { valid: best.valid, best, grid_points: grid.len() })
}
