mod common;

use common::{nearby, rng, seeded};
use nalgebra::DVector;
use proptest::prelude::*;
use rescaled_core::calculus::{hessian, hessian_blocks};
use rescaled_core::linalg::{min_singular_value, symmetric_eigenvalues};
use rescaled_core::model::{check_norm_bounds, evaluate, FunctionKind};
use rescaled_core::spectral::{
    block_bounds, certify, certify_dominance, certify_psd, dominance_spectrum, empirical_lipschitz, g_terms, lipschitz_ceiling,
    lipschitz_chain, measured_radius, r0, weight_threshold, WeightMode,
};

fn kind_strategy() -> impl Strategy<Value = FunctionKind> {
    prop_oneof![Just(FunctionKind::Exp), Just(FunctionKind::Cosh), Just(FunctionKind::Sinh)]
}

fn weighted(seed: u64, kind: FunctionKind, n: usize, d: usize, l: f64, mode: WeightMode) -> (rescaled_core::ProblemInstance, DVector<f64>) {
    let (inst, x) = seeded(seed, kind, n, d, 0.9);
    let e = evaluate(&inst, &x).unwrap();
    let threshold = weight_threshold(r0(&e, &inst.b), min_singular_value(&inst.a), l, mode).unwrap();
    let inst = inst.with_weights(DVector::from_element(n, threshold.sqrt())).unwrap();
    (inst, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psd_weights_give_floor(seed in any::<u64>(), kind in kind_strategy(), d in 1usize..5, extra in 0usize..30, l in 0.01f64..10.0) {
        let n = d + extra;
        let (inst, x) = weighted(seed, kind, n, d, l, WeightMode::Psd);
        let e = evaluate(&inst, &x).unwrap();
        let h = hessian(&inst, &e).unwrap();
        prop_assert!(certify_psd(&h, l).unwrap(), "λmin {}", symmetric_eigenvalues(&h)[0]);
    }

    #[test]
    fn dominance_weights_keep_pencil_tight(seed in any::<u64>(), kind in kind_strategy(), d in 1usize..5, extra in 0usize..30, l in 0.01f64..10.0) {
        let n = d + extra;
        let (inst, x) = weighted(seed, kind, n, d, l, WeightMode::Dominance);
        let e = evaluate(&inst, &x).unwrap();
        let view = hessian_blocks(&inst, &e).unwrap();
        let ev = dominance_spectrum(&view.b_full, &inst.w).unwrap();
        prop_assert!(certify_dominance(&view.b_full, &inst.w).unwrap(), "spectrum {} .. {}", ev[0], ev[ev.len() - 1]);
    }

    #[test]
    fn block_bounds_hold(seed in any::<u64>(), kind in kind_strategy(), n in 1usize..25, d in 1usize..5) {
        let (inst, x) = seeded(seed, kind, n, d, 0.9);
        let e = evaluate(&inst, &x).unwrap();
        for check in block_bounds(&inst, &e).unwrap() {
            prop_assert!(check.holds, "{} {} {}", check.part, check.upper_margin, check.lower_margin);
        }
    }

    #[test]
    fn norm_bounds_hold(seed in any::<u64>(), kind in kind_strategy(), n in 1usize..50, d in 1usize..8, radius in 0.1f64..2.0, r in 2.0f64..3.0) {
        let (inst, x) = seeded(seed, kind, n, d, radius);
        let e = evaluate(&inst, &x).unwrap();
        let report = check_norm_bounds(&inst, &e, r).unwrap();
        prop_assert!(report.all_hold() && !report.below_stated_radius);
    }

    #[test]
    fn lipschitz_suite(seed in any::<u64>(), kind in kind_strategy(), n in 1usize..25, d in 1usize..5, gap in 1e-6f64..0.0099) {
        let (inst, x) = seeded(seed, kind, n, d, 0.9);
        let y = nearby(&inst, &x, &mut rng(seed ^ 0x5eed), gap);
        let ratio = empirical_lipschitz(&inst, &x, &y).unwrap();
        let ceiling = lipschitz_ceiling(n, measured_radius(&inst, &x, &y));
        prop_assert!(ceiling.admits(ratio));
        let g = g_terms(&inst, &x, &y).unwrap();
        prop_assert!(g.terms_hold && g.part1_holds && g.part2_holds, "{g:?}");
        let chain = lipschitz_chain(&inst, &x, &y).unwrap();
        prop_assert!(chain.all_hold(), "{chain:?}");
    }
}

#[test]
fn c_bound_needs_radius_at_least_one() {
    // n = 1, tiny b: ‖c‖ ≈ ‖u‖ ≈ 1 while 2nR e^{R²} ≈ 2R.
    let (inst, x) = seeded(1, FunctionKind::Exp, 1, 1, 0.1);
    let e = evaluate(&inst, &x).unwrap();
    let report = check_norm_bounds(&inst, &e, 0.1).unwrap();
    assert!(report.below_stated_radius);
    assert!(report.holds_u && report.holds_alpha && !report.holds_c);
}

#[test]
fn certificate_bundle_passes_with_dominating_weights() {
    for kind in FunctionKind::ALL {
        let (inst, x) = weighted(3, kind, 20, 3, 1.0, WeightMode::Dominance);
        let y = nearby(&inst, &x, &mut rng(4), 1e-3);
        let cert = certify(&inst, &x, &y, 1.0).unwrap();
        let failed: Vec<_> = cert.passed.iter().filter(|(_, ok)| !ok).collect();
        assert!(failed.is_empty(), "{kind}: {failed:?}");
    }
}

#[test]
fn flat_weight_constant_is_weaker_than_measured_threshold() {
    // A flat w² = 100 + l/σ² can fall short of 200 R₀⁴ once R₀ > 1.
    let (inst, x) = seeded(9, FunctionKind::Exp, 30, 3, 0.9);
    let e = evaluate(&inst, &x).unwrap();
    let rr = r0(&e, &inst.b);
    assert!(rr > 1.0);
    let sigma = min_singular_value(&inst.a);
    let flat = 100.0 + 1.0 / (sigma * sigma);
    let measured = weight_threshold(rr, sigma, 1.0, WeightMode::Dominance).unwrap();
    assert!(measured > flat);
}
