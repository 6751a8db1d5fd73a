mod common;

use common::{jacobi_eigenvalues, random_symmetric, trace_product};
use ellfit_core::flatten::{flatten, unflatten};
use ellfit_core::linalg::{op_norm, random_orthogonal, spd_solve, sym_eig_extremes, sym_eigenvalues, SymMatrix};
use ellfit_core::RandomStream;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::try_from_matrix(m).unwrap()
}

#[test]
fn flatten_isometry_on_random_pairs() {
    for (k, d) in [2usize, 3, 10, 30].into_iter().enumerate() {
        let mut rng = RandomStream::new(41, k as u64).rng();
        for _ in 0..1000 {
            let m = random_symmetric(d, &mut rng);
            let n = random_symmetric(d, &mut rng);
            let inner = flatten(&sym(m.clone())).dot(&flatten(&sym(n.clone())));
            let exact = trace_product(&m, &n);
            assert!((inner - exact).abs() <= 1e-12 * m.norm() * n.norm(), "d={d}: {inner} vs {exact}");
        }
    }
}

#[test]
fn flatten_five_by_five_pair() {
    let mut rng = RandomStream::new(5, 5).rng();
    let m = random_symmetric(5, &mut rng);
    let n = random_symmetric(5, &mut rng);
    let inner = flatten(&sym(m.clone())).dot(&flatten(&sym(n.clone())));
    let exact = trace_product(&m, &n);
    assert!((inner - exact).abs() <= 1e-12 * exact.abs().max(1.0));
}

#[test]
fn extremes_match_jacobi_oracle_at_fifty() {
    let mut rng = RandomStream::new(50, 50).rng();
    for _ in 0..5 {
        let m = random_symmetric(50, &mut rng);
        let oracle = jacobi_eigenvalues(&m);
        let s = sym(m);
        let (lo, hi) = sym_eig_extremes(&s).unwrap();
        let scale = oracle[0].abs().max(oracle[49].abs());
        assert!((lo - oracle[0]).abs() <= 1e-10 * scale);
        assert!((hi - oracle[49]).abs() <= 1e-10 * scale);
        for (a, b) in sym_eigenvalues(&s).unwrap().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn op_norm_of_all_ones() {
    let ones = SymMatrix::from_fn(7, |_, _| 1.0);
    assert!((op_norm(&ones).unwrap() - 7.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extremes_are_rotation_invariant(d in 2usize..12, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 1).rng();
        let m = sym(random_symmetric(d, &mut rng));
        let q = random_orthogonal(d, &mut rng);
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        let (rlo, rhi) = sym_eig_extremes(&m.conjugate(&q)).unwrap();
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        prop_assert!((lo - rlo).abs() <= 1e-9 * scale);
        prop_assert!((hi - rhi).abs() <= 1e-9 * scale);
    }

    #[test]
    fn spd_solve_residual_contract(n in 1usize..40, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 2).rng();
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let a = SymMatrix::gram_of_rows(&g).shift_diagonal(1.0);
        let b = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let w = spd_solve(&a, &b).unwrap();
        let r = (a.as_matrix() * &w - &b).norm();
        prop_assert!(r <= 1e-9 * (op_norm(&a).unwrap() * w.norm() + b.norm()));
    }

    #[test]
    fn unflatten_inverts_flatten(d in 1usize..9, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 3).rng();
        let m = sym(random_symmetric(d, &mut rng));
        let back = unflatten(&flatten(&m));
        prop_assert!((back.as_matrix() - m.as_matrix()).amax() <= 1e-14 * (1.0 + m.as_matrix().amax()));
    }
}
