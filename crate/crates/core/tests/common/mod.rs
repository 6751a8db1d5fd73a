#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off.sqrt() <= 1e-15 * a.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `Tr[MN]` by direct summation.
pub fn trace_product(m: &DMatrix<f64>, n: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)] * n[(j, i)]).sum()
}

pub fn random_symmetric<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

/// `E[d/χ²_d − 1 | χ²_d ≥ d/2]` in closed form:
/// `x f_d(x) = d f_{d−2}(x)` gives `E[d/χ² ; χ² ≥ t] = (d/(d−2)) P[χ²_{d−2} ≥ t]`.
pub fn truncated_qtilde_mean(d: usize) -> f64 {
    let k = d as f64;
    let t = k / 2.0;
    let full = ChiSquared::new(k).unwrap();
    let lower = ChiSquared::new(k - 2.0).unwrap();
    (k / (k - 2.0)) * lower.sf(t) / full.sf(t) - 1.0
}
