use ellfit_core::cloud::sample_gaussian_cloud;
use ellfit_core::dual::{certificate_check, certificate_search, dual_matrix, grid_oracle, weak_duality_probe, SearchOptions};
use ellfit_core::fitter::{solve_identity_perturbation, Tolerances};
use ellfit_core::linalg::sym_eig_extremes;
use ellfit_core::RandomStream;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn sum_zero(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RandomStream::new(seed, 77).rng();
    let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    z.iter_mut().for_each(|v| *v -= m);
    z
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_symmetry(d in 1usize..6, n in 2usize..8, seed in any::<u64>()) {
        let c = sample_gaussian_cloud(d, n, &RandomStream::new(seed, 1));
        let z = sum_zero(n, seed);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let (lo, hi) = sym_eig_extremes(&dual_matrix(&z, &c)).unwrap();
        let flipped = certificate_check(&neg, &c).unwrap();
        prop_assert!((flipped.lambda_max + lo).abs() <= 1e-12 * (1.0 + lo.abs()));
        if certificate_check(&z, &c).unwrap().valid {
            prop_assert!(hi < 0.0);
            prop_assert!(sym_eig_extremes(&dual_matrix(&neg, &c)).unwrap().0 > 0.0);
        }
    }

    #[test]
    fn validity_is_scale_invariant(d in 1usize..5, n in 2usize..8, seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let c = sample_gaussian_cloud(d, n, &RandomStream::new(seed, 2));
        let z = sum_zero(n, seed);
        let scaled: Vec<f64> = z.iter().map(|v| v * scale).collect();
        prop_assert_eq!(certificate_check(&z, &c).unwrap().valid, certificate_check(&scaled, &c).unwrap().valid);
    }
}

#[test]
fn mutual_exclusion_with_successful_fits() {
    let opts = SearchOptions { max_iters: 300, restarts: 4, step: 0.1 };
    let mut checked = 0;
    for s in 0..40 {
        let c = sample_gaussian_cloud(5, 6, &RandomStream::new(s, 3));
        let fit = solve_identity_perturbation(&c, &Tolerances::default()).unwrap();
        if fit.success {
            let out = certificate_search(&c, &opts, &RandomStream::new(s, 4)).unwrap();
            assert!(out.best.lambda_max >= -1e-8, "seed {s}: {}", out.best.lambda_max);
            assert_eq!(weak_duality_probe(&c, &fit, 50, &RandomStream::new(s, 5)).unwrap(), 0);
            checked += 1;
        }
    }
    assert!(checked >= 10);
}

#[test]
fn grid_oracle_never_beats_a_feasible_fit() {
    for s in 0..10 {
        let c = sample_gaussian_cloud(3, 4, &RandomStream::new(s, 6));
        let fit = solve_identity_perturbation(&c, &Tolerances::default()).unwrap();
        if fit.success {
            assert!(!grid_oracle(&c, 2000).unwrap().valid);
        }
    }
}
