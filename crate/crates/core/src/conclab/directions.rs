//! Per-direction diagnostics `U(a)ᵢ = ⟨ωᵢ, a⟩²` and `f(a) = Σ [Θ⁻¹y]ᵢ U(a)ᵢ`,
//! sampled direction sets, and exact small nets for `d ≤ 3`.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truncation::{centered_weights, condition_norms, expected_truncated_qtilde};
use crate::cloud::{sample_sphere_rows, PointCloud};
use crate::error::{Error, Result};
use crate::fitter::kernel_gram_of_directions;
use crate::linalg::{op_norm, spd_solve, SymMatrix};
use crate::rng::{Purpose, RandomStream};
use crate::stats::quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostics {
    pub a: Vec<f64>,
    pub eta: f64,
    pub u: Vec<f64>,
    /// Indices with `|⟨ωᵢ, a⟩| > η`, ascending.
    pub s: Vec<usize>,
    pub f: f64,
    /// Sum over `S`.
    pub f1: f64,
    /// Sum over the complement of `S`.
    pub f2: f64,
}

/// Splits `f(a)` over `S(η)` and its complement. `theta_inv_y` is `Θ⁻¹y`.
pub fn direction_diagnostics(cloud: &PointCloud, theta_inv_y: &[f64], a: &[f64], eta: f64) -> Result<DirectionDiagnostics> {
    if a.len() != cloud.dim() || theta_inv_y.len() != cloud.len() {
        return Err(Error::InvalidShape(format!(
            "direction of length {} and weights of length {} for a cloud of {} points in dimension {}",
            a.len(),
            theta_inv_y.len(),
            cloud.len(),
            cloud.dim()
        )));
    }
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("direction has norm {norm}, expected 1")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Precondition(format!("eta = {eta} outside (0, 1]")));
    }
    let av = DVector::from_column_slice(a);
    let proj = cloud.directions() * &av;
    let u: Vec<f64> = proj.iter().map(|p| p * p).collect();
    let s: Vec<usize> = (0..u.len()).filter(|&i| proj[i].abs() > eta).collect();
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    for (i, (&w, &ui)) in theta_inv_y.iter().zip(&u).enumerate() {
        if proj[i].abs() > eta {
            f1 += w * ui;
        } else {
            f2 += w * ui;
        }
    }
    Ok(DirectionDiagnostics { a: a.to_vec(), eta, u, s, f: f1 + f2, f1, f2 })
}

/// `‖U(a)‖₂ = √(Σ ⟨ωᵢ, a⟩⁴)` for each row `a` of `dirs`.
pub fn u_norms(cloud: &PointCloud, dirs: &DMatrix<f64>) -> Vec<f64> {
    let proj = cloud.directions() * dirs.transpose();
    proj.column_iter().map(|c| c.iter().map(|p| p.powi(4)).sum::<f64>().sqrt()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub d: usize,
    pub n: usize,
    pub trials: u64,
    pub num_directions: usize,
    pub eta: f64,
    /// Trials where Θ could not be factored are skipped.
    pub skipped: u64,
    pub abs_f: Vec<f64>,
    pub abs_f1_max: f64,
    pub abs_f2_max: f64,
    pub q99: f64,
    pub max: f64,
}

/// Samples directions, norms conditioned on the truncation event, the
/// centered weights `y`, and `|f(a)|` over random unit `a`.
pub fn direction_profile(d: usize, n: usize, num_directions: usize, trials: u64, eta: f64, seed: u64) -> Result<ProfileReport> {
    super::require_trials(trials)?;
    if num_directions == 0 || n == 0 || d < 3 {
        return Err(Error::Precondition("need d >= 3, n >= 1 and at least one direction".into()));
    }
    let expected_r = expected_truncated_qtilde(d)?;
    let per_trial: Vec<Option<Vec<(f64, f64, f64)>>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Option<Vec<(f64, f64, f64)>>> {
            let mut rng = RandomStream::for_purpose(seed, Purpose::DirectionDiagnostics, t as u32).rng();
            let dirs = sample_sphere_rows(d, n, &mut rng);
            let mut norms: Vec<f64> = (0..n).map(|_| super::truncation::sample_norm_sq(d, &mut rng)).collect();
            condition_norms(&mut norms, d, &mut rng);
            let y = centered_weights(&norms, expected_r);
            let cloud = PointCloud::from_directions(dirs, norms)?;
            let theta = kernel_gram_of_directions(cloud.directions()).theta;
            let w = match spd_solve(&theta, &DVector::from_vec(y)) {
                Ok(w) => w,
                Err(Error::NotPositiveDefinite { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let probes = sample_sphere_rows(d, num_directions, &mut rng);
            let mut out = Vec::with_capacity(num_directions);
            for j in 0..num_directions {
                let a: Vec<f64> = probes.row(j).iter().copied().collect();
                let diag = direction_diagnostics(&cloud, w.as_slice(), &a, eta)?;
                out.push((diag.f.abs(), diag.f1.abs(), diag.f2.abs()));
            }
            Ok(Some(out))
        })
        .collect::<Result<_>>()?;
    let skipped = per_trial.iter().filter(|v| v.is_none()).count() as u64;
    let rows: Vec<(f64, f64, f64)> = per_trial.into_iter().flatten().flatten().collect();
    if rows.is_empty() {
        return Err(Error::Numeric("every trial produced a singular kernel Gram matrix".into()));
    }
    let abs_f: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(ProfileReport {
        d,
        n,
        trials,
        num_directions,
        eta,
        skipped,
        q99: quantile(&abs_f, 0.99),
        max: abs_f.iter().copied().fold(0.0, f64::max),
        abs_f1_max: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        abs_f2_max: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        abs_f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetProfileReport {
    pub d: usize,
    pub n: usize,
    pub trials: u64,
    pub num_directions: usize,
    pub constants: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub max_u_norm: f64,
}

/// `2√(3n/d²) + 1`, `2` and `4`, ascending.
pub fn net_constants(d: usize, n: usize) -> Vec<f64> {
    let first = 2.0 * (3.0 * n as f64 / (d as f64 * d as f64)).sqrt() + 1.0;
    let mut c = vec![first, 2.0, 4.0];
    c.sort_by(f64::total_cmp);
    c
}

/// Frequency of `max_j ‖U(a_j)‖₂ ≤ C₂` over sampled direction sets.
pub fn net_profile_event(d: usize, n: usize, num_directions: usize, trials: u64, seed: u64) -> Result<NetProfileReport> {
    super::require_trials(trials)?;
    if num_directions == 0 || n == 0 || d == 0 {
        return Err(Error::Precondition("need d, n >= 1 and at least one direction".into()));
    }
    let maxima: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::for_purpose(seed, Purpose::NetProfile, t as u32).rng();
            let cloud = PointCloud::from_directions(sample_sphere_rows(d, n, &mut rng), vec![1.0; n])?;
            let probes = sample_sphere_rows(d, num_directions, &mut rng);
            Ok(u_norms(&cloud, &probes).into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let constants = net_constants(d, n);
    let frequencies = constants.iter().map(|&c| maxima.iter().filter(|&&m| m <= c).count() as f64 / trials as f64).collect();
    Ok(NetProfileReport {
        d,
        n,
        trials,
        num_directions,
        constants,
        frequencies,
        max_u_norm: maxima.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactNet {
    pub d: usize,
    /// Rows are unit vectors.
    pub points: DMatrix<f64>,
    /// Largest distance from a sphere point to the net (an upper estimate for `d = 3`).
    pub covering_radius: f64,
}

/// Seven equally spaced points on the circle, or a subdivided icosahedron on
/// the 2-sphere refined until the covering radius is at most `1/2`.
pub fn exact_net(d: usize) -> Result<ExactNet> {
    match d {
        2 => {
            let m = 7;
            let points = DMatrix::from_fn(m, 2, |i, k| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                if k == 0 {
                    t.cos()
                } else {
                    t.sin()
                }
            });
            Ok(ExactNet { d, points, covering_radius: 2.0 * (std::f64::consts::PI / (2.0 * m as f64)).sin() })
        }
        3 => {
            let (mut verts, mut faces) = icosahedron();
            let mut radius = covering_radius(&verts, &faces);
            while radius > 0.5 {
                (verts, faces) = subdivide(&verts, &faces);
                radius = covering_radius(&verts, &faces);
            }
            let points = DMatrix::from_fn(verts.len(), 3, |i, k| verts[i][k]);
            Ok(ExactNet { d, points, covering_radius: radius })
        }
        _ => Err(Error::Precondition(format!("exact nets are built for d in {{2, 3}}, got {d}"))),
    }
}

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let verts = raw.iter().map(|v| Vector3::new(v[0], v[1], v[2]).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn subdivide(verts: &[Vector3<f64>], faces: &[[usize; 3]]) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let mut verts = verts.to_vec();
    let mut midpoints = std::collections::HashMap::new();
    let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            verts.push(((verts[a] + verts[b]) / 2.0).normalize());
            verts.len() - 1
        })
    };
    let mut out = Vec::with_capacity(faces.len() * 4);
    for &[a, b, c] in faces {
        let ab = mid(a, b, &mut verts);
        let bc = mid(b, c, &mut verts);
        let ca = mid(c, a, &mut verts);
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    (verts, out)
}

/// Largest chordal circumradius over the spherical triangles. Each triangle is
/// acute, so its circumcap covers it.
fn covering_radius(verts: &[Vector3<f64>], faces: &[[usize; 3]]) -> f64 {
    faces
        .iter()
        .map(|&[a, b, c]| {
            let n = (verts[b] - verts[a]).cross(&(verts[c] - verts[a])).normalize();
            let center = if n.dot(&verts[a]) < 0.0 { -n } else { n };
            (center - verts[a]).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFactorCheck {
    pub d: usize,
    pub net_size: usize,
    pub covering_radius: f64,
    pub matrices: usize,
    /// Largest `‖M‖_op / max_{a ∈ net} |aᵀ M a|` over the sampled matrices.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// Checks `max_{‖a‖=1} |aᵀ M a| ≤ 2 · max_{a ∈ net} |aᵀ M a|` on random
/// symmetric `M` of the form `Σ cᵢ ωᵢωᵢᵀ`, the shape that appears in the ansatz.
pub fn net_factor_check(d: usize, matrices: usize, seed: u64) -> Result<NetFactorCheck> {
    let net = exact_net(d)?;
    let ratios: Vec<f64> = (0..matrices)
        .into_par_iter()
        .map(|m| {
            let mut rng = RandomStream::for_purpose(seed, Purpose::NetProfile, (1 << 31) | m as u32).rng();
            let mat = random_weighted_outer_sum(d, &mut rng);
            let sphere = op_norm(&mat)?;
            let on_net = (0..net.points.nrows())
                .map(|i| {
                    mat.quadratic_form(&net.points.row(i).transpose().into_owned()).abs()
                })
                .fold(0.0, f64::max);
            Ok(sphere / on_net)
        })
        .collect::<Result<_>>()?;
    let worst_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(NetFactorCheck {
        d,
        net_size: net.points.nrows(),
        covering_radius: net.covering_radius,
        matrices,
        worst_ratio,
        holds: worst_ratio <= 2.0,
    })
}

fn random_weighted_outer_sum<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SymMatrix {
    let k = rng.random_range(1..=2 * d + 2);
    let rows = sample_sphere_rows(d, k, rng);
    let weights: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    SymMatrix::weighted_outer_sum(&rows, &weights)
}
