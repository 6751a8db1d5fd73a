mod common;

use common::truncated_qtilde_mean;
use ellfit_core::cloud::{sample_sphere_rows, PointCloud};
use ellfit_core::conclab::deviation::{gram_deviation, infty_norm_event, inverse_perturbation_sweep};
use ellfit_core::conclab::directions::{direction_diagnostics, direction_profile, net_profile_event};
use ellfit_core::conclab::moments::{fourth_moment_estimate, l_hat_two, projected_moment_growth, qtilde_mean_estimate};
use ellfit_core::conclab::tails::{
    chi2_tail, hanson_wright_samples, qtilde_tail, s_eta_samples, weibull_sum_samples, weibull_sum_tail, WeibullParams,
};
use ellfit_core::conclab::truncation::{centered_weights, condition_norms, expected_truncated_qtilde, sample_norm_sq};
use ellfit_core::linalg::{random_orthogonal, SymMatrix};
use ellfit_core::stats::{ks_distance, MeanEstimate};
use ellfit_core::RandomStream;
use proptest::prelude::*;

#[test]
fn truncated_mean_matches_closed_form() {
    for d in [5usize, 8, 13, 21, 34, 55, 89, 144, 233, 377, 500] {
        let quad = expected_truncated_qtilde(d).unwrap();
        let exact = truncated_qtilde_mean(d);
        assert!((quad - exact).abs() <= 1e-9, "d={d}: {quad} vs {exact}");
        assert!(quad.abs() <= 3.0 / d as f64);
    }
}

#[test]
fn centered_weights_have_zero_mean() {
    let d = 50;
    let er = expected_truncated_qtilde(d).unwrap();
    let mut rng = RandomStream::new(12, 0).rng();
    let mut norms: Vec<f64> = (0..100_000).map(|_| sample_norm_sq(d, &mut rng)).collect();
    condition_norms(&mut norms, d, &mut rng);
    let y = centered_weights(&norms, er);
    let est = MeanEstimate::from_samples(&y);
    assert!(est.mean.abs() <= 3.0 * est.std_error, "{est:?}");
}

#[test]
fn qtilde_mean_at_one_hundred() {
    let est = qtilde_mean_estimate(100, 100_000, 3);
    assert!(est.within(2.0 / 98.0, 3.0), "{est:?}");
}

#[test]
fn fourth_moment_at_three() {
    let est = fourth_moment_estimate(3, 100_000, 4);
    assert!((est.mean - 0.2).abs() <= 0.004);
}

#[test]
fn chi2_examples() {
    let t = chi2_tail(10, &[0.0, 1.0, 4.0], 100_000, 5).unwrap();
    assert!(t.passes());
    assert_eq!(t.upper.bound_values[0], 1.0);
    assert!(t.upper.empirical_survival[1] <= (-1f64).exp());
    assert!(t.upper.empirical_survival[2] <= (-4f64).exp());
    assert!(t.upper.is_monotone() && t.lower.is_monotone());
}

#[test]
fn qtilde_examples() {
    let t = qtilde_tail(100, &[0.5, 0.999], 100_000, 6).unwrap();
    assert!((t.bound_values[0] - 2.0 * (-1.5625f64).exp()).abs() < 1e-12);
    assert!(t.empirical_survival.iter().zip(&t.bound_values).all(|(e, b)| e <= b));
    assert!(t.is_monotone());
}

#[test]
fn weibull_examples() {
    let sums = weibull_sum_samples(50, 250, 1.0, 20_000, 7);
    let scale = 250.0 / 2500.0;
    let at_three = sums.iter().filter(|&&s| s >= 3.0 * scale).count() as f64 / sums.len() as f64;
    assert!(at_three < 0.5);
    let curve = weibull_sum_tail(50, 250, 1.0, &[1.0, 2.0, 4.0], 20_000, 7, WeibullParams::default()).unwrap();
    assert!(curve.is_monotone());
    assert!(curve.passes());
    assert!(weibull_sum_samples(20, 40, 1e-9, 100, 8).iter().all(|&s| s == 0.0));
}

#[test]
fn s_eta_boundaries() {
    assert!(s_eta_samples(10, 30, 1.0, 200, 1).iter().all(|&s| s == 0.0));
    assert!(s_eta_samples(10, 30, 0.0, 200, 1).iter().all(|&s| s == 30.0));
}

#[test]
fn hanson_wright_rotation_invariance() {
    let d = 12;
    let m = SymMatrix::from_diagonal(&(1..=d).map(|i| i as f64).collect::<Vec<_>>());
    let q = random_orthogonal(d, &mut RandomStream::new(3, 3).rng());
    let a = hanson_wright_samples(&m, 100_000, 21);
    let b = hanson_wright_samples(&m.conjugate(&q), 100_000, 22);
    assert!(ks_distance(&a, &b) <= 0.02);
}

#[test]
fn gram_deviation_rotation_invariance() {
    // The law of Θ does not depend on a global rotation of the directions.
    let d = 10;
    let q = random_orthogonal(d, &mut RandomStream::new(4, 4).rng());
    let mut plain = Vec::new();
    let mut rotated = Vec::new();
    for t in 0..10_000u64 {
        let mut rng = RandomStream::new(31, t).rng();
        let dirs = sample_sphere_rows(d, 2, &mut rng);
        let a: f64 = dirs.row(0).dot(&dirs.row(1)).powi(2);
        plain.push(a);
        let other = sample_sphere_rows(d, 2, &mut RandomStream::new(32, t).rng()) * q.transpose();
        rotated.push(other.row(0).dot(&other.row(1)).powi(2));
    }
    assert!(ks_distance(&plain, &rotated) <= 0.03);
}

#[test]
fn gram_deviation_scales_like_sqrt_n() {
    let small = gram_deviation(40, 80, 50, 9).unwrap().median_gram_deviation();
    let large = gram_deviation(40, 320, 50, 9).unwrap().median_gram_deviation();
    let ratio = large / small;
    assert!((1.5..=2.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn infty_norm_identity_operator_frequencies() {
    let r = infty_norm_event(60, 180, 400, 10, true).unwrap();
    let at = |c: f64| r.frequencies[r.constants.iter().position(|&x| x == c).unwrap()];
    // (1 − 5.42e-4)^180 from the chi-square law of y; see the README.
    let exact = 0.90699;
    let se = (exact * (1.0 - exact) / 400.0f64).sqrt();
    assert!((at(4.0) - exact).abs() <= 4.0 * se, "{}", at(4.0));
    assert!(at(8.0) >= 0.99);
}

#[test]
fn infty_norm_with_theta_at_eight() {
    let r = infty_norm_event(60, 180, 200, 11, false).unwrap();
    assert!(r.frequencies[3] >= 0.99);
}

#[test]
fn inverse_perturbation_holds_on_random_pairs() {
    let s = inverse_perturbation_sweep(500, 10, 12).unwrap();
    assert_eq!(s.holds, 500);
}

#[test]
fn net_profile_examples() {
    let r = net_profile_event(60, 180, 500, 100, 13).unwrap();
    let at_two = r.frequencies[r.constants.iter().position(|&c| c == 2.0).unwrap()];
    assert!(at_two >= 0.99);
    assert!(r.frequencies.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn direction_profile_percentile() {
    let r = direction_profile(60, 180, 50, 200, 0.5, 14).unwrap();
    assert!(r.q99 <= 0.25, "q99 {}", r.q99);
}

#[test]
fn moment_growth_k_two_is_analytic() {
    let r = projected_moment_growth(20, 8, 5, 100_000, 15).unwrap();
    assert!((r.l_hat[0] - l_hat_two(20)).abs() <= 0.03 * l_hat_two(20));
    assert!(r.spread() <= 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_splits_over_s(d in 2usize..8, n in 1usize..30, eta in 0.01f64..1.0, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 1).rng();
        let c = PointCloud::from_directions(sample_sphere_rows(d, n, &mut rng), vec![1.0; n]).unwrap();
        let w: Vec<f64> = sample_sphere_rows(n, 1, &mut rng).row(0).iter().copied().collect();
        let a: Vec<f64> = sample_sphere_rows(d, 1, &mut rng).row(0).iter().copied().collect();
        let diag = direction_diagnostics(&c, &w, &a, eta).unwrap();
        prop_assert!((diag.f - diag.f1 - diag.f2).abs() <= 1e-10 * (1.0 + diag.f.abs()));
        for (i, u) in diag.u.iter().enumerate() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(u));
            prop_assert_eq!(diag.s.contains(&i), u.sqrt() > eta);
        }
    }
}
