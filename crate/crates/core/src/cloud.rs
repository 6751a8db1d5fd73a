//! Gaussian point clouds and uniform sphere directions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Norms below this are treated as degenerate input.
pub const MIN_NORM_SQ: f64 = 1e-12;

/// `n` points of `ℝᵈ` with cached squared norms and unit directions,
/// `points[i] = √(norms_sq[i]) · directions[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    norms_sq: Vec<f64>,
    directions: DMatrix<f64>,
}

impl PointCloud {
    /// Builds a cloud from an `n × d` matrix of row points.
    pub fn from_points(points: DMatrix<f64>) -> Result<Self> {
        let (n, d) = points.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidShape(format!("cloud must be non-empty, got {n}x{d}")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("point coordinates must be finite".into()));
        }
        let mut norms_sq = Vec::with_capacity(n);
        let mut directions = DMatrix::zeros(n, d);
        for i in 0..n {
            let row = points.row(i);
            let nsq = row.norm_squared();
            if nsq < MIN_NORM_SQ {
                return Err(Error::DegenerateInput(format!("point {i} has squared norm {nsq:e}")));
            }
            let norm = nsq.sqrt();
            for a in 0..d {
                directions[(i, a)] = row[a] / norm;
            }
            norms_sq.push(nsq);
        }
        Ok(Self { points, norms_sq, directions })
    }

    /// Builds a cloud from unit directions and squared norms.
    pub fn from_directions(directions: DMatrix<f64>, norms_sq: Vec<f64>) -> Result<Self> {
        if directions.nrows() != norms_sq.len() {
            return Err(Error::InvalidShape(format!(
                "{} directions but {} norms",
                directions.nrows(),
                norms_sq.len()
            )));
        }
        let scaled = DMatrix::from_fn(directions.nrows(), directions.ncols(), |i, a| {
            directions[(i, a)] * norms_sq[i].max(0.0).sqrt()
        });
        Self::from_points(scaled)
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn direction(&self, i: usize) -> DVector<f64> {
        self.directions.row(i).transpose()
    }

    /// Applies `x ↦ Q x` to every point.
    pub fn rotate(&self, q: &DMatrix<f64>) -> Result<Self> {
        Self::from_points(&self.points * q.transpose())
    }

    /// Reorders points: new point `i` is old point `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let p = DMatrix::from_fn(self.len(), self.dim(), |i, a| self.points[(perm[i], a)]);
        Self::from_points(p)
    }

    /// Same directions, every point rescaled to unit norm.
    pub fn normalized(&self) -> Self {
        Self {
            points: self.directions.clone(),
            norms_sq: vec![1.0; self.len()],
            directions: self.directions.clone(),
        }
    }
}

/// `n` i.i.d. rows of `N(0, I_d/d)`, drawn row by row from `stream`.
pub fn sample_gaussian_cloud(d: usize, n: usize, stream: &RandomStream) -> PointCloud {
    let mut rng = stream.rng();
    sample_gaussian_cloud_with(d, n, &mut rng)
}

pub fn sample_gaussian_cloud_with<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> PointCloud {
    assert!(d >= 1 && n >= 1, "cloud needs d >= 1 and n >= 1");
    let scale = 1.0 / (d as f64).sqrt();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for _ in 0..d {
            data.push(rng.sample::<f64, _>(StandardNormal) * scale);
        }
    }
    let points = DMatrix::from_row_slice(n, d, &data);
    // A zero Gaussian draw has probability zero; resampling is never needed in practice.
    PointCloud::from_points(points).expect("Gaussian draw is non-degenerate")
}

/// Uniform point of `S^{d-1}` from a normalized standard Gaussian vector.
pub fn sample_sphere_direction(d: usize, stream: &RandomStream) -> DVector<f64> {
    sample_sphere_with(d, &mut stream.rng())
}

pub fn sample_sphere_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    assert!(d >= 1);
    loop {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// `count` uniform directions as the rows of a matrix.
pub fn sample_sphere_rows<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(count, d);
    for j in 0..count {
        let v = sample_sphere_with(d, rng);
        m.row_mut(j).copy_from(&v.transpose());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    #[test]
    fn deterministic() {
        let s = RandomStream::for_purpose(7, Purpose::FitTrial, 0);
        assert_eq!(sample_gaussian_cloud(5, 9, &s), sample_gaussian_cloud(5, 9, &s));
    }

    #[test]
    fn invariants_hold() {
        let c = sample_gaussian_cloud(6, 40, &RandomStream::new(1, 1));
        for i in 0..c.len() {
            assert!((c.direction(i).norm() - 1.0).abs() < 1e-12);
            assert!(c.norms_sq()[i] > 0.0);
            let rebuilt = c.direction(i) * c.norms_sq()[i].sqrt();
            assert!((rebuilt - c.point(i)).amax() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_directions_are_signs() {
        let c = sample_gaussian_cloud(1, 50, &RandomStream::new(2, 2));
        assert!(c.directions().iter().all(|&w| w == 1.0 || w == -1.0));
    }

    #[test]
    fn one_dimensional_sphere_balanced() {
        let mut rng = RandomStream::new(3, 0).rng();
        let plus = (0..10_000).filter(|_| sample_sphere_with(1, &mut rng)[0] > 0.0).count();
        let freq = plus as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&freq), "{freq}");
    }

    #[test]
    fn prefix_property() {
        // Rows are drawn in order, so a smaller cloud is a prefix of a larger one.
        let s = RandomStream::new(9, 4);
        let small = sample_gaussian_cloud(4, 3, &s);
        let big = sample_gaussian_cloud(4, 10, &s);
        assert_eq!(small.points(), &big.points().rows(0, 3).into_owned());
    }

    #[test]
    fn degenerate_point_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(PointCloud::from_points(p), Err(Error::DegenerateInput(_))));
    }
}
