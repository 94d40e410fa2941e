mod common;

use common::{gaussian_vector, rng, seeded};
use proptest::prelude::*;
use rescaled_core::model::{evaluate, small_range_holds, FunctionKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn companion_identity(seed in any::<u64>(), n in 1usize..40, d in 1usize..6, radius in 0.1f64..3.0) {
        for kind in [FunctionKind::Cosh, FunctionKind::Sinh] {
            let (inst, x) = seeded(seed, kind, n, d, radius);
            let e = evaluate(&inst, &x).unwrap();
            let q = kind.q_offset();
            for (u, v) in e.u.iter().zip(e.v.iter()) {
                let gap = v * v - u * u - q;
                prop_assert!(gap.abs() <= 1e-12 * (u * u).max(1.0));
            }
        }
    }

    #[test]
    fn positivity_by_kind(seed in any::<u64>(), n in 1usize..40, d in 1usize..6) {
        let (inst, x) = seeded(seed, FunctionKind::Exp, n, d, 2.0);
        prop_assert!(evaluate(&inst, &x).unwrap().u.iter().all(|u| *u > 0.0));
        let (inst, x) = seeded(seed, FunctionKind::Cosh, n, d, 2.0);
        prop_assert!(evaluate(&inst, &x).unwrap().u.iter().all(|u| *u >= 1.0));
    }

    #[test]
    fn loss_splits_into_data_and_regularizer(seed in any::<u64>(), n in 1usize..40, d in 1usize..6) {
        for kind in FunctionKind::ALL {
            let (inst, x) = seeded(seed, kind, n, d, 1.0);
            let e = evaluate(&inst, &x).unwrap();
            prop_assert!((e.loss_u - 0.5 * e.c.norm_squared()).abs() <= 1e-14 * e.loss_u.max(1.0));
            let reg = 0.5 * inst.w.component_mul(&e.ax).norm_squared();
            prop_assert!((e.loss_reg - reg).abs() <= 1e-14 * reg.max(1.0));
            prop_assert_eq!(e.loss, e.loss_u + e.loss_reg);
        }
    }

    #[test]
    fn small_range_approximation(seed in any::<u64>(), n in 1usize..40, gap in 0.0f64..0.01) {
        let mut r = rng(seed);
        let a = gaussian_vector(&mut r, n);
        let h = gaussian_vector(&mut r, n);
        let b = &a + &h * (gap / h.amax().max(1e-300));
        for kind in FunctionKind::ALL {
            prop_assert_eq!(small_range_holds(kind, &a, &b), Some(true));
        }
    }
}
