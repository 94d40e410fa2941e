//! Exact and sketched Newton iterations, convergence traces and the
//! audits that compare observed contraction with the theory.
//!
//! The sketched step replaces the Hessian by `AᵀD̃A`, where `D̃` row-samples
//! the diagonal surrogate `B_diag + W²`. Under dominating weights this is
//! an `ε₀`-approximate Hessian and each step contracts the distance to the
//! optimum by at least `0.4` inside the `(l, M)` basin.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{diag_surrogate, gradient, hessian};
use crate::model::{evaluate, ProblemInstance};
use crate::sketch::subsample;
use crate::spectral::{empirical_lipschitz, PSD_SLACK, SMALL_RANGE};
use crate::{linalg, lit, to_f64, Error, Real, Result};

/// Consecutive loss increases after which a run is declared diverged.
pub const DIVERGENCE_PATIENCE: usize = 5;
/// Default sketch accuracy handed to the row sampler each iteration.
pub const DEFAULT_EPS1: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Exact,
    Sketched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop once the Newton step norm falls to `eps`.
    pub eps: f64,
    /// Total failure probability, split as `delta / T` per iteration.
    pub delta: f64,
    pub eps1: f64,
    pub max_iters: usize,
    pub mode: StepMode,
    pub seed: u64,
    /// Step scaling; `None` is the undamped update.
    pub damping: Option<f64>,
    /// Run exactly this many steps and ignore the stopping rule.
    pub fixed_iters: Option<usize>,
    /// Record wall time per iteration (breaks byte-identical traces).
    pub record_time: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            delta: 0.01,
            eps1: DEFAULT_EPS1,
            max_iters: 50,
            mode: StepMode::Exact,
            seed: 0,
            damping: None,
            fixed_iters: None,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T: Real> {
    pub iter: usize,
    pub x: DVector<T>,
    pub loss: T,
    pub grad_norm: T,
    pub step_norm: T,
    pub dist_to_ref: Option<T>,
    pub sketch_nnz: Option<usize>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalStatus {
    Converged,
    MaxIters,
    Diverged,
    Error(String),
}

impl TerminalStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::MaxIters => "max_iters",
            TerminalStatus::Diverged => "diverged",
            TerminalStatus::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace<T: Real> {
    pub records: Vec<IterationRecord<T>>,
    pub status: TerminalStatus,
    /// The last iterate (after the final accepted step).
    pub x_final: DVector<T>,
}

impl<T: Real> ConvergenceTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.status == TerminalStatus::Converged
    }

    /// Iterates in order, ending with `x_final`.
    pub fn iterates(&self) -> Vec<&DVector<T>> {
        let mut pts: Vec<&DVector<T>> = self.records.iter().map(|r| &r.x).collect();
        pts.push(&self.x_final);
        pts
    }
}

/// Result of one sketched step.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedStep<T: Real> {
    pub x_next: DVector<T>,
    pub nnz: usize,
}

struct StepOutcome<T: Real> {
    direction: DVector<T>,
    loss: T,
    grad_norm: T,
    nnz: Option<usize>,
}

fn exact_direction<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>) -> Result<StepOutcome<T>> {
    let e = evaluate(instance, x)?;
    let g = gradient(instance, &e)?;
    let h = hessian(instance, &e)?;
    let direction = linalg::spd_solve(&h, &g)?;
    Ok(StepOutcome {
        direction,
        loss: e.loss,
        grad_norm: g.norm(),
        nnz: None,
    })
}

fn sketched_direction<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, eps1: f64, delta1: f64, seed: u64) -> Result<StepOutcome<T>> {
    let e = evaluate(instance, x)?;
    let g = gradient(instance, &e)?;
    let surrogate = diag_surrogate(instance, &e)?;
    if let Some(index) = surrogate.iter().position(|s| !(*s > T::zero())) {
        return Err(Error::NonPositiveSurrogate {
            index,
            value: to_f64(surrogate[index]),
        });
    }
    let sketch = subsample(&instance.a, &surrogate, eps1, delta1, seed)?;
    let h_tilde = sketch.gram(&instance.a);
    let direction = linalg::spd_solve(&h_tilde, &g)?;
    Ok(StepOutcome {
        direction,
        loss: e.loss,
        grad_norm: g.norm(),
        nnz: Some(sketch.nnz),
    })
}

/// `x − H(x)⁻¹ g(x)`.
pub fn newton_step_exact<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>) -> Result<DVector<T>> {
    let out = exact_direction(instance, x)?;
    Ok(x - out.direction)
}

/// `x − (AᵀD̃A)⁻¹ g(x)` with `D̃` sampled from the diagonal surrogate.
pub fn newton_step_sketched<T: Real>(
    instance: &ProblemInstance<T>,
    x: &DVector<T>,
    eps1: f64,
    delta1: f64,
    seed: u64,
) -> Result<SketchedStep<T>> {
    let out = sketched_direction(instance, x, eps1, delta1, seed)?;
    Ok(SketchedStep {
        x_next: x - out.direction,
        nnz: out.nnz.unwrap_or(0),
    })
}

fn validate(opts: &SolveOptions) -> Result<()> {
    if !(opts.eps > 0.0 && opts.eps < 0.1) {
        return Err(Error::InvalidEps(opts.eps));
    }
    if !(opts.delta > 0.0 && opts.delta < 0.1) {
        return Err(Error::InvalidDelta(opts.delta));
    }
    if opts.mode == StepMode::Sketched && !(opts.eps1 > 0.0 && opts.eps1 <= 0.1) {
        return Err(Error::InvalidEps(opts.eps1));
    }
    if opts.max_iters == 0 || opts.fixed_iters == Some(0) {
        return Err(Error::InvalidArgument("iteration budget must be at least 1".into()));
    }
    if let Some(damp) = opts.damping {
        if !(damp > 0.0 && damp <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping {damp} outside (0, 1]")));
        }
    }
    Ok(())
}

/// Iterate Newton steps from `x0`.
///
/// Errors only for invalid options or an inadmissible starting point;
/// failures during the run end the trace with [`TerminalStatus::Error`].
pub fn solve<T: Real>(
    instance: &ProblemInstance<T>,
    x0: &DVector<T>,
    opts: &SolveOptions,
    x_ref: Option<&DVector<T>>,
) -> Result<ConvergenceTrace<T>> {
    validate(opts)?;
    evaluate(instance, x0)?;
    if let Some(r) = x_ref {
        if r.len() != instance.d() {
            return Err(Error::DimensionMismatch {
                context: "reference optimum",
                expected: instance.d(),
                actual: r.len(),
            });
        }
    }
    let budget = opts.fixed_iters.unwrap_or(opts.max_iters);
    let delta1 = opts.delta / budget as f64;
    let damping: T = lit(opts.damping.unwrap_or(1.0));
    let eps: T = lit(opts.eps);
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut status = None;
    let mut increases = 0usize;
    let mut prev_loss: Option<T> = None;

    for iter in 0..budget {
        let started = Instant::now();
        let sketch_seed: u64 = master.random();
        let outcome = match opts.mode {
            StepMode::Exact => exact_direction(instance, &x),
            StepMode::Sketched => sketched_direction(instance, &x, opts.eps1, delta1, sketch_seed),
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                status = Some(TerminalStatus::Error(e.to_string()));
                break;
            }
        };
        let step = outcome.direction * damping;
        let step_norm = step.norm();
        let x_next = &x - &step;
        records.push(IterationRecord {
            iter,
            x: x.clone(),
            loss: outcome.loss,
            grad_norm: outcome.grad_norm,
            step_norm,
            dist_to_ref: x_ref.map(|r| (&x - r).norm()),
            sketch_nnz: outcome.nnz,
            wall_ms: opts.record_time.then(|| started.elapsed().as_secs_f64() * 1e3),
        });
        if let Some(prev) = prev_loss {
            increases = if outcome.loss > prev { increases + 1 } else { 0 };
        }
        prev_loss = Some(outcome.loss);
        x = x_next;
        if increases >= DIVERGENCE_PATIENCE {
            status = Some(TerminalStatus::Diverged);
            break;
        }
        if opts.fixed_iters.is_none() && step_norm <= eps {
            status = Some(TerminalStatus::Converged);
            break;
        }
    }
    let status = status.unwrap_or_else(|| match (opts.fixed_iters, records.last()) {
        (Some(_), Some(last)) if last.step_norm <= eps => TerminalStatus::Converged,
        _ => TerminalStatus::MaxIters,
    });
    Ok(ConvergenceTrace {
        records,
        status,
        x_final: x,
    })
}

/// `⌈ln(r₀/ε) / ln 2.5⌉`, the step count a `0.4`-contraction needs.
pub fn iteration_bound(r0: f64, eps: f64) -> usize {
    if r0 <= eps {
        return 0;
    }
    ((r0 / eps).ln() / 2.5f64.ln()).ceil() as usize
}

/// Observed contraction of one step against the one-step ceiling
/// `2(ε₀ + M r_t / (l − M r_t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionStep {
    pub step: usize,
    pub r_t: f64,
    pub r_next: f64,
    pub ratio: f64,
    /// `+∞` once `M r_t ≥ l`.
    pub ceiling: f64,
    pub within_ceiling: bool,
    /// `r_{t+1} ≤ 0.4 r_t`.
    pub within_induction: bool,
}

pub fn audit_contraction<T: Real>(trace: &ConvergenceTrace<T>, x_star: &DVector<T>, eps0: f64, l: f64, m: f64) -> Vec<ContractionStep> {
    let dists: Vec<f64> = trace.iterates().iter().map(|x| to_f64((*x - x_star).norm())).collect();
    dists
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > 0.0)
        .map(|(step, w)| {
            let (r_t, r_next) = (w[0], w[1]);
            let rbar = m * r_t;
            let ceiling = if rbar < l {
                2.0 * (eps0 + rbar / (l - rbar))
            } else {
                f64::INFINITY
            };
            let ratio = r_next / r_t;
            ContractionStep {
                step,
                r_t,
                r_next,
                ratio,
                ceiling,
                within_ceiling: ratio <= ceiling,
                within_induction: ratio <= 0.4,
            }
        })
        .collect()
}

/// The three `(l, M)`-goodness conditions checked for a concrete
/// candidate optimum and start point.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessCertificate<T: Real> {
    pub l: T,
    pub m: T,
    pub r0: T,
    pub ok_local_min: bool,
    pub ok_lipschitz: bool,
    pub ok_init: bool,
}

impl<T: Real> GoodnessCertificate<T> {
    pub fn all_ok(&self) -> bool {
        self.ok_local_min && self.ok_lipschitz && self.ok_init
    }
}

/// `x_star` must be stationary (Newton decrement below `1e−9`) with
/// `H(x*) ⪰ l I`; `m` must dominate `‖H(x*) − H(y)‖ / ‖x* − y‖` at four
/// points `y` on the segment to `x0`; and `‖x0 − x*‖ m ≤ 0.1 l`.
pub fn certify_goodness<T: Real>(
    instance: &ProblemInstance<T>,
    x_star: &DVector<T>,
    x0: &DVector<T>,
    l: T,
    m: T,
) -> Result<GoodnessCertificate<T>> {
    if !(l > T::zero() && m > T::zero()) {
        return Err(Error::PreconditionViolated("l and M must be positive".into()));
    }
    let e = evaluate(instance, x_star)?;
    let g = gradient(instance, &e)?;
    let h = hessian(instance, &e)?;
    let min_eig = linalg::symmetric_eigenvalues(&h)[0];
    let decrement = linalg::spd_solve(&h, &g).map(|z| z.norm()).ok();
    let ok_local_min = min_eig >= l * (T::one() - lit(PSD_SLACK)) && decrement.is_some_and(|d| d <= lit(1e-9));

    // The definition has no small-range restriction, so the ratio is
    // measured directly rather than through `empirical_lipschitz`.
    let diff = x0 - x_star;
    let mut ok_lipschitz = true;
    for s in [0.25, 0.5, 0.75, 1.0] {
        let y = x_star + &diff * lit::<T>(s);
        let gap = (&y - x_star).norm();
        if gap > T::zero() {
            let hy = hessian(instance, &evaluate(instance, &y)?)?;
            ok_lipschitz &= linalg::spectral_norm(&(&hy - &h)) / gap <= m;
        }
    }
    let r0 = diff.norm();
    Ok(GoodnessCertificate {
        l,
        m,
        r0,
        ok_local_min,
        ok_lipschitz,
        ok_init: r0 * m <= lit::<T>(0.1) * l,
    })
}

/// Largest measured `‖H(p) − H(q)‖ / ‖p − q‖` over random pairs in the
/// ball of radius `radius` around `center`, each pair shrunk until it
/// meets the small-range condition.
pub fn estimate_lipschitz<T: Real>(
    instance: &ProblemInstance<T>,
    center: &DVector<T>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = instance.d();
    let unit = |rng: &mut ChaCha8Rng| {
        let v = DVector::<f64>::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let nrm = v.norm();
        if nrm > 0.0 {
            v / nrm
        } else {
            v
        }
    };
    let a_inf = (0..instance.n()).fold(0.0f64, |m, i| m.max(to_f64(instance.a.row(i).norm())));
    let mut best = T::zero();
    for _ in 0..samples {
        let p_off = unit(&mut rng) * (radius * rng.random::<f64>());
        let mut q_off = unit(&mut rng) * (radius * rng.random::<f64>());
        let gap = (&p_off - &q_off).norm() * a_inf;
        if gap >= SMALL_RANGE {
            let shrink = 0.9 * SMALL_RANGE / gap;
            q_off = &p_off + (&q_off - &p_off) * shrink;
        }
        let p = center + p_off.map(lit::<T>);
        let q = center + q_off.map(lit::<T>);
        best = best.max(empirical_lipschitz(instance, &p, &q)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FunctionKind;
    use nalgebra::{dvector, DMatrix};

    fn sinh_demo() -> ProblemInstance<f64> {
        ProblemInstance::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::from_element(2, 1.0),
            FunctionKind::Sinh,
        )
        .unwrap()
    }

    /// Scalar Newton on f(t) = ½ sinh²t + ½ t², written out by hand.
    fn scalar_newton(t: f64) -> f64 {
        let fp = t.sinh() * t.cosh() + t;
        let fpp = (2.0 * t).cosh() + 1.0;
        t - fp / fpp
    }

    #[test]
    fn exact_step_on_sinh_demo() {
        let inst = sinh_demo();
        let next = newton_step_exact(&inst, &dvector![0.1, -0.1]).unwrap();
        assert!(next.norm() < 1e-3);
        let oracle = scalar_newton(0.1);
        assert!((next[0] - oracle).abs() < 1e-15 && (next[1] + oracle).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let inst = sinh_demo();
        let zero = dvector![0.0, 0.0];
        assert_eq!(newton_step_exact(&inst, &zero).unwrap(), zero);
        let s = newton_step_sketched(&inst, &zero, 0.05, 0.01, 99).unwrap();
        assert_eq!(s.x_next, zero);
    }

    #[test]
    fn solve_from_optimum_is_one_record() {
        let inst = sinh_demo();
        let trace = solve(&inst, &dvector![0.0, 0.0], &SolveOptions::default(), None).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert!(trace.converged());
        let audit = audit_contraction(&trace, &dvector![0.0, 0.0], 0.0, 1.0, 1.0);
        assert!(audit.is_empty());
    }

    #[test]
    fn solve_sinh_demo_converges_fast() {
        let inst = sinh_demo();
        let opts = SolveOptions {
            eps: 1e-10,
            ..SolveOptions::default()
        };
        let trace = solve(&inst, &dvector![0.1, -0.1], &opts, Some(&dvector![0.0, 0.0])).unwrap();
        assert!(trace.converged());
        assert!(trace.iterations() <= 6, "took {}", trace.iterations());
        assert!(trace.x_final.norm() < 1e-10);
        // Exact Newton contracts superlinearly near the optimum.
        let audit = audit_contraction(&trace, &dvector![0.0, 0.0], 0.0, 2.0, 10.0);
        assert!(audit.windows(2).all(|w| w[1].ratio < w[0].ratio || w[1].r_next == 0.0));
        for rec in trace.records.windows(2) {
            assert!(rec[1].loss <= rec[0].loss);
            assert!(rec[1].iter > rec[0].iter);
        }
    }

    #[test]
    fn option_validation() {
        let inst = sinh_demo();
        let x0 = dvector![0.1, 0.1];
        for bad in [
            SolveOptions {
                eps: 0.0,
                ..Default::default()
            },
            SolveOptions {
                delta: 0.2,
                ..Default::default()
            },
            SolveOptions {
                max_iters: 0,
                ..Default::default()
            },
            SolveOptions {
                damping: Some(1.5),
                ..Default::default()
            },
        ] {
            assert!(solve(&inst, &x0, &bad, None).is_err());
        }
    }

    #[test]
    fn overflowing_start_rejected() {
        let inst = sinh_demo();
        assert!(matches!(
            solve(&inst, &dvector![100.0, 0.0], &SolveOptions::default(), None),
            Err(Error::OverflowGuard { .. })
        ));
    }

    #[test]
    fn fixed_iteration_mode_runs_budget() {
        let inst = sinh_demo();
        let opts = SolveOptions {
            fixed_iters: Some(7),
            ..Default::default()
        };
        let trace = solve(&inst, &dvector![0.1, -0.1], &opts, None).unwrap();
        assert_eq!(trace.iterations(), 7);
        assert!(trace.converged());
    }

    #[test]
    fn iteration_bound_formula() {
        assert_eq!(iteration_bound(1.0, 1e-8), 21);
        assert_eq!(iteration_bound(1e-9, 1e-8), 0);
        assert_eq!(iteration_bound(2.5, 1.0), 1);
    }

    #[test]
    fn sketched_solve_is_deterministic() {
        let a = DMatrix::from_fn(12, 2, |i, j| (((i * 5 + j * 3) % 7) as f64 - 3.0) * 0.05);
        let inst = ProblemInstance::new(
            a,
            DVector::from_element(12, 0.05),
            DVector::from_element(12, 30.0),
            FunctionKind::Exp,
        )
        .unwrap();
        let opts = SolveOptions {
            mode: StepMode::Sketched,
            seed: 5,
            ..Default::default()
        };
        let t1 = solve(&inst, &dvector![0.3, -0.2], &opts, None).unwrap();
        let t2 = solve(&inst, &dvector![0.3, -0.2], &opts, None).unwrap();
        assert_eq!(t1, t2);
        assert!(t1.converged());
    }
}
