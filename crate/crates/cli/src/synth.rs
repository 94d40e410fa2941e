//! Seeded instance synthesis and weight fitting.
//!
//! Weights are set from the measured `R₀` at a candidate optimum, the
//! optimum is re-polished with exact Newton under the new weights, and
//! the threshold is re-checked there; a few rounds settle it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rescaled_core::calculus::hessian;
use rescaled_core::linalg::{min_singular_value, spectral_norm, symmetric_eigenvalues};
use rescaled_core::model::{evaluate, FunctionKind, OVERFLOW_GUARD};
use rescaled_core::solver::{certify_goodness, estimate_lipschitz, solve, SolveOptions};
use rescaled_core::spectral::{r0, weight_threshold, WeightMode, SMALL_RANGE};
use rescaled_core::{GoodnessCertificate, ProblemInstance};

use crate::error::{CliError, InModule};

/// Largest radius with `R²` within the overflow guard.
pub fn max_radius() -> f64 {
    OVERFLOW_GUARD.sqrt()
}

const FIT_ROUNDS: usize = 8;
/// Headroom applied on top of the threshold when weights are raised.
const WEIGHT_HEADROOM: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightPolicy {
    Psd,
    Dominance,
}

impl WeightPolicy {
    pub fn mode(self) -> WeightMode {
        match self {
            WeightPolicy::Psd => WeightMode::Psd,
            WeightPolicy::Dominance => WeightMode::Dominance,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightPolicy::Psd => "psd",
            WeightPolicy::Dominance => "dominance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub radius: f64,
    pub kind: FunctionKind,
    pub policy: WeightPolicy,
    /// Hessian floor `l` in the weight threshold.
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub instance: ProblemInstance,
    /// The random point the weights were first fitted at.
    pub x_sample: DVector<f64>,
    /// Polished optimum under the final weights.
    pub x_star: DVector<f64>,
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn rescale(v: DVector<f64>, norm: f64) -> DVector<f64> {
    let current = v.norm();
    if current > 0.0 {
        v * (norm / current)
    } else {
        v
    }
}

/// Gaussian `A` with `‖A‖ = radius`, `‖b‖ = radius/2`, a sample point with
/// `‖x‖ = radius/2`, and weights fitted for `policy`.
pub fn synthesize(spec: &SynthSpec) -> Result<Synthesized, CliError> {
    if spec.n == 0 || spec.d == 0 {
        return Err(CliError::Config("synthesis needs n ≥ 1 and d ≥ 1".into()));
    }
    if spec.n < spec.d {
        return Err(CliError::Config(format!(
            "synthesis needs n ≥ d for a full-rank A (got {}x{})",
            spec.n, spec.d
        )));
    }
    if !(spec.radius > 0.0 && spec.radius <= max_radius()) {
        return Err(CliError::Config(format!("radius {} outside (0, {:.4}]", spec.radius, max_radius())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = DMatrix::from_fn(spec.n, spec.d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &a * (spec.radius / spectral_norm(&a));
    let b = rescale(gaussian_vector(&mut rng, spec.n), 0.5 * spec.radius);
    let x_sample = rescale(gaussian_vector(&mut rng, spec.d), 0.5 * spec.radius);
    let instance = ProblemInstance::new(a, b, DVector::from_element(spec.n, 1.0), spec.kind).in_module("model")?;
    let (instance, x_star) = fit_weights(instance, &x_sample, spec.policy, spec.l)?;
    Ok(Synthesized {
        instance,
        x_sample,
        x_star,
    })
}

fn polish(instance: &ProblemInstance, from: &DVector<f64>) -> Result<DVector<f64>, CliError> {
    let opts = SolveOptions {
        eps: 1e-12,
        max_iters: 200,
        ..Default::default()
    };
    let trace = solve(instance, from, &opts, None).in_module("solver")?;
    if !trace.converged() {
        return Err(CliError::Config(format!(
            "reference solve did not converge ({})",
            trace.status.label()
        )));
    }
    Ok(trace.x_final)
}

/// Uniform weights meeting the policy threshold at the polished optimum.
/// Returns the reweighted instance and that optimum.
pub fn fit_weights(
    instance: ProblemInstance,
    x_init: &DVector<f64>,
    policy: WeightPolicy,
    l: f64,
) -> Result<(ProblemInstance, DVector<f64>), CliError> {
    let sigma = min_singular_value(&instance.a);
    let mut instance = instance;
    let mut x = x_init.clone();
    let mut polished = false;
    for _ in 0..FIT_ROUNDS {
        let e = evaluate(&instance, &x).in_module("model")?;
        let need = weight_threshold(r0(&e, &instance.b), sigma, l, policy.mode()).in_module("spectral")?;
        let admissible = instance.w.iter().all(|w| w * w >= need);
        if admissible && polished {
            return Ok((instance, x));
        }
        if !admissible {
            let w = (need * WEIGHT_HEADROOM).sqrt();
            instance = instance.with_weights(DVector::from_element(instance.n(), w)).in_module("model")?;
        }
        x = polish(&instance, &x)?;
        polished = true;
    }
    Err(CliError::Config(format!("weights did not settle within {FIT_ROUNDS} rounds")))
}

/// A start point inside the contraction basin of `x_star`, with the
/// measured `l`, an empirical `M` and the goodness verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Basin {
    pub x0: DVector<f64>,
    pub l: f64,
    pub m: f64,
    pub certificate: GoodnessCertificate,
}

/// `l = λ_min(H(x*))`; `M` is twice the largest Hessian difference ratio
/// measured on random small-range pairs near `x*`; the start sits at
/// half of `min(0.1 l / M, small-range radius)` in a seeded direction.
pub fn basin_start(instance: &ProblemInstance, x_star: &DVector<f64>, seed: u64) -> Result<Basin, CliError> {
    let e = evaluate(instance, x_star).in_module("model")?;
    let l = symmetric_eigenvalues(&hessian(instance, &e).in_module("calculus")?)[0];
    if !(l > 0.0) {
        return Err(CliError::Config(format!(
            "Hessian at the reference optimum is not positive definite (λ_min = {l})"
        )));
    }
    let row_max = instance.a.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let probe = 0.9 * SMALL_RANGE / row_max;
    let m = 2.0 * estimate_lipschitz(instance, x_star, probe, 16, seed).in_module("solver")?;
    let m = if m > 0.0 { m } else { f64::MIN_POSITIVE };
    let r_start = 0.5 * (0.1 * l / m).min(probe);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let dir = rescale(gaussian_vector(&mut rng, instance.d()), 1.0);
    let x0 = x_star + dir * r_start;
    let certificate = certify_goodness(instance, x_star, &x0, l, m).in_module("solver")?;
    Ok(Basin { x0, l, m, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rescaled_core::calculus::hessian_blocks;
    use rescaled_core::spectral::{certify_dominance, certify_psd};

    fn spec(policy: WeightPolicy, seed: u64) -> SynthSpec {
        SynthSpec {
            n: 30,
            d: 3,
            seed,
            radius: 1.0,
            kind: FunctionKind::Exp,
            policy,
            l: 1.0,
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = synthesize(&spec(WeightPolicy::Dominance, 4)).unwrap();
        let b = synthesize(&spec(WeightPolicy::Dominance, 4)).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&spec(WeightPolicy::Dominance, 5)).unwrap();
        assert_ne!(a.instance.a, c.instance.a);
    }

    #[test]
    fn scaling() {
        let s = synthesize(&spec(WeightPolicy::Psd, 1)).unwrap();
        assert!((spectral_norm(&s.instance.a) - 1.0).abs() < 1e-12);
        assert!((s.instance.b.norm() - 0.5).abs() < 1e-12);
        assert!((s.x_sample.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn psd_policy_certifies_at_optimum() {
        let s = synthesize(&spec(WeightPolicy::Psd, 2)).unwrap();
        let e = evaluate(&s.instance, &s.x_star).unwrap();
        assert!(certify_psd(&hessian(&s.instance, &e).unwrap(), 1.0).unwrap());
    }

    #[test]
    fn dominance_policy_certifies_at_optimum() {
        for kind in FunctionKind::ALL {
            let s = synthesize(&SynthSpec {
                kind,
                ..spec(WeightPolicy::Dominance, 3)
            })
            .unwrap();
            let e = evaluate(&s.instance, &s.x_star).unwrap();
            let view = hessian_blocks(&s.instance, &e).unwrap();
            assert!(certify_dominance(&view.b_full, &s.instance.w).unwrap(), "{kind}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(synthesize(&SynthSpec {
            n: 2,
            d: 3,
            ..spec(WeightPolicy::Psd, 0)
        })
        .is_err());
        assert!(synthesize(&SynthSpec {
            radius: 9.5,
            ..spec(WeightPolicy::Psd, 0)
        })
        .is_err());
    }

    #[test]
    fn basin_start_is_good() {
        let s = synthesize(&spec(WeightPolicy::Dominance, 8)).unwrap();
        let basin = basin_start(&s.instance, &s.x_star, 8).unwrap();
        assert!(basin.certificate.all_ok(), "{:?}", basin.certificate);
    }
}
