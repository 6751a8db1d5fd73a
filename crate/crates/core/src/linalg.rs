//! Dense symmetric linear algebra.
//!
//! [`SymMatrix`] stores a full square matrix but is only ever built by
//! mirroring one triangle, so `m[(i, j)] == m[(j, i)]` holds bit for bit.
//! Eigenvalues come from nalgebra's dense symmetric QR iteration; the
//! Cholesky factorization is local because it needs a relative pivot
//! threshold that nalgebra does not expose.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`spd_solve`].
pub const PIVOT_RELATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { inner: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { inner: DMatrix::identity(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self { inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)) }
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut inner = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in j..dim {
                let v = f(i, j);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Self { inner }
    }

    /// Mirrors the lower triangle of a square matrix.
    pub fn from_lower(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidShape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Accepts a matrix that is already exactly symmetric.
    pub fn try_from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidShape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidShape(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// `Σ_k w_k v_k v_kᵀ` where `v_k` are the rows of `rows`.
    pub fn weighted_outer_sum(rows: &DMatrix<f64>, weights: &[f64]) -> Self {
        assert_eq!(rows.nrows(), weights.len());
        let dim = rows.ncols();
        let scaled = DMatrix::from_fn(rows.nrows(), dim, |k, a| rows[(k, a)] * weights[k]);
        let prod = rows.transpose() * scaled;
        Self::from_fn(dim, |i, j| prod[(i, j)])
    }

    /// Gram matrix `R Rᵀ` of the rows of `rows`.
    pub fn gram_of_rows(rows: &DMatrix<f64>) -> Self {
        let prod = rows * rows.transpose();
        Self::from_fn(rows.nrows(), |i, j| prod[(i, j)])
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { inner: &self.inner * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { inner: &self.inner - &other.inner }
    }

    /// Adds `c` to every diagonal entry.
    pub fn shift_diagonal(&self, c: f64) -> Self {
        let mut inner = self.inner.clone();
        for i in 0..inner.nrows() {
            inner[(i, i)] += c;
        }
        Self { inner }
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.inner * v
    }

    /// `aᵀ M a`.
    pub fn quadratic_form(&self, a: &DVector<f64>) -> f64 {
        a.dot(&(&self.inner * a))
    }

    /// `Q M Qᵀ` for a square `q` of matching size.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Self {
        let prod = q * &self.inner * q.transpose();
        Self::from_fn(self.dim(), |i, j| prod[(i, j)])
    }

    /// Permutes rows and columns: result[(i, j)] = self[(perm[i], perm[j])].
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim(), |i, j| self.inner[(perm[i], perm[j])])
    }
}

fn check_finite(m: &SymMatrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericInput("symmetric matrix has NaN or infinite entries".into()))
    }
}

/// All eigenvalues in ascending order.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.dim() == 0 {
        return Err(Error::InvalidShape("empty matrix".into()));
    }
    let mut vals: Vec<f64> = m.inner.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Returns `(λ_min, λ_max)`.
pub fn sym_eig_extremes(m: &SymMatrix) -> Result<(f64, f64)> {
    let vals = sym_eigenvalues(m)?;
    Ok((vals[0], vals[vals.len() - 1]))
}

/// Full decomposition, eigenvalues ascending with matching eigenvector columns.
pub fn sym_eigen(m: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_finite(m)?;
    if m.dim() == 0 {
        return Err(Error::InvalidShape("empty matrix".into()));
    }
    let eig = SymmetricEigen::new(m.inner.clone());
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(m.dim(), m.dim(), |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((vals, vecs))
}

/// Largest absolute eigenvalue.
pub fn op_norm(m: &SymMatrix) -> Result<f64> {
    let (lo, hi) = sym_eig_extremes(m)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a = L Lᵀ`, rejecting any pivot at or below
    /// `PIVOT_RELATIVE_TOL · trace(a)/dim`.
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        check_finite(a)?;
        let n = a.dim();
        if n == 0 {
            return Err(Error::InvalidShape("empty matrix".into()));
        }
        let threshold = PIVOT_RELATIVE_TOL * (a.trace() / n as f64).max(0.0);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                let v = a.get(i, j) - dot;
                if i == j {
                    if !(v > threshold && v > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: v, threshold });
                    }
                    l[i * n + i] = v.sqrt();
                } else {
                    l[i * n + j] = v / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::InvalidShape(format!("rhs length {} for dimension {n}", b.len())));
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let dot: f64 = (0..i).map(|k| self.l[i * n + k] * y[k]).sum();
            y[i] = (b[i] - dot) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let dot: f64 = ((i + 1)..n).map(|k| self.l[k * n + i] * y[k]).sum();
            y[i] = (y[i] - dot) / self.l[i * n + i];
        }
        Ok(DVector::from_vec(y))
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        let mut cols = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = DVector::zeros(n);
            e[c] = 1.0;
            let x = self.solve(&e).expect("dimension matches");
            cols.set_column(c, &x);
        }
        SymMatrix::from_fn(n, |i, j| cols[(i, j)])
    }
}

/// Solves `A w = b` for symmetric positive-definite `A`.
pub fn spd_solve(a: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.dim() {
        return Err(Error::InvalidShape(format!("rhs length {} for dimension {}", b.len(), a.dim())));
    }
    Cholesky::factor(a)?.solve(b)
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with column signs fixed by the diagonal of R.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..dim {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use approx::assert_abs_diff_eq;

    fn m2(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        SymMatrix::try_from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn extremes_two_by_two() {
        let (lo, hi) = sym_eig_extremes(&m2(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn extremes_diagonal() {
        let (lo, hi) = sym_eig_extremes(&SymMatrix::from_diagonal(&[-5.0, 0.0, 3.0])).unwrap();
        assert_eq!((lo, hi), (-5.0, 3.0));
    }

    #[test]
    fn non_finite_rejected() {
        let m = SymMatrix::from_diagonal(&[1.0, f64::NAN]);
        assert!(matches!(sym_eig_extremes(&m), Err(Error::NumericInput(_))));
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-16 * 4.0, 1.0]);
        assert!(SymMatrix::try_from_matrix(m).is_err());
    }

    #[test]
    fn op_norm_cases() {
        assert_eq!(op_norm(&SymMatrix::from_diagonal(&[3.0, -5.0])).unwrap(), 5.0);
        assert_eq!(op_norm(&SymMatrix::zeros(4)).unwrap(), 0.0);
        let ones = SymMatrix::from_fn(7, |_, _| 1.0);
        assert_abs_diff_eq!(op_norm(&ones).unwrap(), 7.0, epsilon = 1e-12);
    }

    #[test]
    fn spd_solve_cases() {
        let w = spd_solve(&SymMatrix::identity(3), &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 2.0, 3.0]);
        let w = spd_solve(&SymMatrix::from_diagonal(&[2.0, 4.0]), &DVector::from_vec(vec![2.0, 8.0])).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 2.0, epsilon = 1e-15);
        let err = spd_solve(&SymMatrix::from_diagonal(&[1.0, -1.0]), &DVector::from_vec(vec![1.0, 1.0]));
        assert!(matches!(err, Err(Error::NotPositiveDefinite { row: 1, .. })));
    }

    #[test]
    fn spd_solve_rhs_mismatch() {
        let err = spd_solve(&SymMatrix::identity(3), &DVector::zeros(2));
        assert!(matches!(err, Err(Error::InvalidShape(_))));
    }

    #[test]
    fn singular_rejected_by_relative_pivot() {
        // Rank one: second pivot is exactly zero.
        let m = SymMatrix::from_fn(2, |_, _| 1.0);
        assert!(Cholesky::factor(&m).is_err());
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = RandomStream::new(5, 5).rng();
        let g = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = SymMatrix::gram_of_rows(&g).shift_diagonal(1.0);
        let inv = Cholesky::factor(&a).unwrap().inverse();
        let prod = a.as_matrix() * inv.as_matrix();
        assert!((prod - DMatrix::identity(6, 6)).amax() < 1e-12);
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = RandomStream::new(1, 2).rng();
        let q = random_orthogonal(8, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(8, 8)).amax() < 1e-13);
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let m = m2(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -1.0], &[0.5, -1.0, 2.0]]);
        let (vals, vecs) = sym_eigen(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rec = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((rec - m.as_matrix()).amax() < 1e-12);
    }
}
