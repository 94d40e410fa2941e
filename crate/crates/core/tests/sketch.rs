mod common;

use common::{gaussian_matrix, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rescaled_core::linalg::weighted_gram;
use rescaled_core::sketch::{keep_probabilities, leverage_scores, subsample, subsample_with_oversampling, verify_sandwich};

fn positive_diagonal(seed: u64, n: usize) -> DVector<f64> {
    let mut r = rng(seed);
    DVector::from_fn(n, |_, _| 0.5 + 4.0 * r.random::<f64>())
}

/// Largest `|M̂_ij − M_ij| / sqrt(M_ii M_jj)`.
fn normalized_gap(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let d = truth.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let scale = (truth[(i, i)] * truth[(j, j)]).sqrt();
            worst = worst.max((estimate[(i, j)] - truth[(i, j)]).abs() / scale);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn leverage_scores_sum_to_rank(seed in any::<u64>(), d in 1usize..6, extra in 0usize..40) {
        let n = d + extra;
        let a = gaussian_matrix(&mut rng(seed), n, d, 1.0);
        let tau = leverage_scores(&a, &positive_diagonal(seed, n)).unwrap();
        prop_assert!((tau.sum() - d as f64).abs() < 1e-10);
        prop_assert!(tau.iter().all(|t| *t >= -1e-14 && *t <= 1.0 + 1e-12));
    }

    #[test]
    fn sketch_is_deterministic_and_bounded(seed in any::<u64>(), d in 1usize..5, extra in 0usize..60) {
        let n = d + extra;
        let a = gaussian_matrix(&mut rng(seed), n, d, 1.0);
        let dd = positive_diagonal(seed ^ 1, n);
        let s1 = subsample(&a, &dd, 0.1, 0.05, seed).unwrap();
        let s2 = subsample(&a, &dd, 0.1, 0.05, seed).unwrap();
        prop_assert_eq!(&s1, &s2);
        prop_assert!((s1.nnz as f64) <= s1.nnz_ceiling);
        prop_assert!(s1.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_oversampling_is_seed_dependent(seed in any::<u64>()) {
        let a = gaussian_matrix(&mut rng(seed), 400, 3, 1.0);
        let dd = DVector::from_element(400, 1.0);
        let s1 = subsample_with_oversampling(&a, &dd, 0.1, 0.05, seed, 0.02).unwrap();
        let s2 = subsample_with_oversampling(&a, &dd, 0.1, 0.05, seed.wrapping_add(1), 0.02).unwrap();
        prop_assert!(s1.nnz < 400);
        prop_assert_ne!(s1.indices, s2.indices);
    }
}

#[test]
fn keep_probability_formula() {
    let tau = DVector::from_vec(vec![1e-6, 0.5, 2e-5]);
    let p = keep_probabilities(&tau, 0.1, 0.05, 40.0);
    let factor = 40.0 * (3.0f64 / 0.05).ln() / 0.01;
    assert!((p[0] - 1e-6 * factor).abs() < 1e-15);
    assert_eq!(p[1], 1.0);
    assert!((p[2] - (2e-5 * factor).min(1.0)).abs() < 1e-15);
}

#[test]
fn sketched_gram_is_unbiased_with_active_sampling() {
    let a = gaussian_matrix(&mut rng(11), 50, 3, 1.0);
    let dd = positive_diagonal(12, 50);
    let truth = weighted_gram(&a, &dd);
    let trials = 2000;
    let mut mean = DMatrix::zeros(3, 3);
    let mut kept = 0usize;
    for t in 0..trials {
        let s = subsample_with_oversampling(&a, &dd, 0.1, 0.05, 1000 + t, 0.01).unwrap();
        kept += s.nnz;
        mean += s.gram(&a);
    }
    mean /= trials as f64;
    assert!(kept < 50 * trials as usize, "sampling saturated");
    let gap = normalized_gap(&mean, &truth);
    assert!(gap <= 0.02, "gap {gap}");
}

#[test]
fn sandwich_holds_when_sampling_is_active_at_default_constant() {
    // n must exceed C d ln(n/δ) / ε² ≈ 1.2e5 for rows to be dropped at C = 40.
    let (n, d) = (200_000, 2);
    let a = gaussian_matrix(&mut rng(21), n, d, 1.0);
    let dd = positive_diagonal(22, n);
    for seed in 0..3 {
        let s = subsample(&a, &dd, 0.1, 0.05, seed).unwrap();
        assert!(s.nnz < n);
        assert!((s.nnz as f64) <= s.nnz_ceiling);
        assert!(verify_sandwich(&a, &dd, &s, 0.1).unwrap());
    }
}

#[test]
fn saturated_sketch_reproduces_exact_gram() {
    let a = gaussian_matrix(&mut rng(31), 200, 4, 1.0);
    let dd = positive_diagonal(32, 200);
    let s = subsample(&a, &dd, 0.1, 0.05, 0).unwrap();
    assert_eq!(s.nnz, 200);
    let truth = weighted_gram(&a, &dd);
    assert!((s.gram(&a) - &truth).norm() <= 1e-12 * truth.norm());
}
