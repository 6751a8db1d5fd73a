//! Isometric flattening of symmetric matrices.
//!
//! A d×d symmetric matrix maps to a vector of length `p = d(d+1)/2`: first the
//! strict upper triangle `(a, b)` with `a < b` in row-major order, each scaled
//! by √2, then the diagonal. With that scaling `⟨flatten(M), flatten(N)⟩ =
//! Tr[MN]`. The coordinate order is part of the output file format.

use std::f64::consts::SQRT_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatVector {
    d: usize,
    coords: Vec<f64>,
}

/// `d(d+1)/2`.
pub fn flat_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Inverse of [`flat_len`], if `p` is a triangular number.
pub fn source_dim(p: usize) -> Option<usize> {
    // d = (√(8p+1) − 1)/2, then confirm exactly in integers.
    let guess = (((8 * p + 1) as f64).sqrt() - 1.0) / 2.0;
    let base = guess.round() as usize;
    (base.saturating_sub(1)..=base + 1).find(|&d| flat_len(d) == p)
}

impl FlatVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let d = source_dim(coords.len()).ok_or_else(|| {
            Error::InvalidShape(format!("length {} is not d(d+1)/2 for any integer d", coords.len()))
        })?;
        Ok(Self { d, coords })
    }

    pub fn source_dim(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dot(&self, other: &FlatVector) -> f64 {
        assert_eq!(self.d, other.d, "flat vectors of different source dimension");
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

pub fn flatten(m: &SymMatrix) -> FlatVector {
    let d = m.dim();
    let mut coords = Vec::with_capacity(flat_len(d));
    for a in 0..d {
        for b in (a + 1)..d {
            coords.push(SQRT_2 * m.get(a, b));
        }
    }
    coords.extend((0..d).map(|a| m.get(a, a)));
    FlatVector { d, coords }
}

/// `flatten(x xᵀ)` without forming the outer product.
pub fn flatten_outer(x: &[f64]) -> FlatVector {
    let d = x.len();
    let mut coords = Vec::with_capacity(flat_len(d));
    for a in 0..d {
        for b in (a + 1)..d {
            coords.push(SQRT_2 * x[a] * x[b]);
        }
    }
    coords.extend(x.iter().map(|v| v * v));
    FlatVector { d, coords }
}

pub fn unflatten(v: &FlatVector) -> SymMatrix {
    let d = v.d;
    let mut upper = vec![0.0; d * d];
    let mut k = 0;
    for a in 0..d {
        for b in (a + 1)..d {
            upper[a * d + b] = v.coords[k] / SQRT_2;
            k += 1;
        }
    }
    for a in 0..d {
        upper[a * d + a] = v.coords[k + a];
    }
    SymMatrix::from_fn(d, |i, j| upper[j * d + i])
}

/// Unflattens a raw coordinate slice, validating its length.
pub fn unflatten_slice(coords: &[f64]) -> Result<SymMatrix> {
    Ok(unflatten(&FlatVector::new(coords.to_vec())?))
}
