//! Numerical certificates for the structural facts the solver depends on:
//! positive definiteness of the Hessian under large weights, dominance of
//! `W²` over the Hessian kernel, the norm sandwiches of each kernel block,
//! and Lipschitz continuity of the Hessian.
//!
//! Spectral norms go through SVD and matrix inequalities through symmetric
//! eigenvalues (Cholesky-whitened for pencils), so every verdict is exact
//! up to floating point.

use nalgebra::{DMatrix, DVector};

use crate::calculus::{hessian, hessian_blocks, HessianView};
use crate::model::{evaluate, Evaluation, ProblemInstance};
use crate::{linalg, lit, to_f64, Error, Real, Result};

/// Relative eigenvalue slack for every semidefinite comparison.
pub const PSD_SLACK: f64 = 1e-8;
/// Largest `‖A(x − y)‖_∞` for which the Lipschitz statements apply.
pub const SMALL_RANGE: f64 = 0.01;
/// Symmetry tolerance for matrices handed to the certificates.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `w² ≥ 10 R₀⁴ + l/σ_min²` forces `H ⪰ l I`.
    Psd,
    /// `w² ≥ 200 R₀⁴ + l/σ_min²` forces `0.9 (B+W²) ⪯ W² ⪯ 1.1 (B+W²)`.
    Dominance,
}

impl WeightMode {
    fn factor(self) -> f64 {
        match self {
            WeightMode::Psd => 10.0,
            WeightMode::Dominance => 200.0,
        }
    }
}

/// `R₀ = max{‖u‖, ‖v‖, ‖b‖, ‖c‖, 1}` at one point.
pub fn r0<T: Real>(eval: &Evaluation<T>, b: &DVector<T>) -> T {
    [eval.u.norm(), eval.v.norm(), b.norm(), eval.c.norm()]
        .into_iter()
        .fold(T::one(), |m, v| m.max(v))
}

/// `R_∞ = max{‖u(x)‖, ‖u(y)‖, ‖c(x)‖, ‖c(y)‖, 1}`.
pub fn r_inf<T: Real>(ex: &Evaluation<T>, ey: &Evaluation<T>) -> T {
    [ex.u.norm(), ey.u.norm(), ex.c.norm(), ey.c.norm()]
        .into_iter()
        .fold(T::one(), |m, v| m.max(v))
}

/// `R_∞` widened by `‖v(x)‖`, `‖v(y)‖` and `‖b‖`, the radius the
/// five-term bound is stated against.
pub fn r_inf_extended<T: Real>(ex: &Evaluation<T>, ey: &Evaluation<T>, b: &DVector<T>) -> T {
    [ex.v.norm(), ey.v.norm(), b.norm()]
        .into_iter()
        .fold(r_inf(ex, ey), |m, v| m.max(v))
}

/// Smallest admissible `w_i²`: `factor · R₀⁴ + l / σ_min²`.
pub fn weight_threshold<T: Real>(r0: T, sigma_min: T, l: T, mode: WeightMode) -> Result<T> {
    if !(sigma_min > T::zero()) {
        return Err(Error::SingularA);
    }
    if !(l > T::zero()) {
        return Err(Error::PreconditionViolated(format!("l = {l} must be positive")));
    }
    let r2 = r0 * r0;
    Ok(lit::<T>(mode.factor()) * r2 * r2 + l / (sigma_min * sigma_min))
}

/// True iff `λ_min(h) ≥ l (1 − 1e−8)`.
pub fn certify_psd<T: Real>(h: &DMatrix<T>, l: T) -> Result<bool> {
    linalg::ensure_symmetric(h, SYMMETRY_TOL)?;
    let ev = linalg::symmetric_eigenvalues(h);
    Ok(ev[0] >= l * (T::one() - lit(PSD_SLACK)))
}

/// Generalized eigenvalues of the pencil `(W², B + W²)`, ascending.
pub fn dominance_spectrum<T: Real>(b_full: &DMatrix<T>, w: &DVector<T>) -> Result<DVector<T>> {
    if b_full.nrows() != w.len() || !b_full.is_square() {
        return Err(Error::DimensionMismatch {
            context: "B vs w",
            expected: w.len(),
            actual: b_full.nrows(),
        });
    }
    linalg::ensure_symmetric(b_full, SYMMETRY_TOL)?;
    let w2 = DMatrix::from_diagonal(&w.component_mul(w));
    let kernel = b_full + &w2;
    linalg::pencil_eigenvalues(&w2, &kernel).ok_or(Error::IndefinitePencil)
}

/// True iff every generalized eigenvalue of `(W², B + W²)` lies in
/// `[0.9, 1.1]`.
pub fn certify_dominance<T: Real>(b_full: &DMatrix<T>, w: &DVector<T>) -> Result<bool> {
    let ev = dominance_spectrum(b_full, w)?;
    let lo = lit::<T>(0.9) * (T::one() - lit(PSD_SLACK));
    let hi = lit::<T>(1.1) * (T::one() + lit(PSD_SLACK));
    Ok(ev[0] >= lo && ev[ev.len() - 1] <= hi)
}

/// An upper bound that may exceed the `f64` range; kept in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCeiling {
    pub ln_value: f64,
    /// `+∞` when `ln_value > 700`.
    pub value: f64,
    pub overflowed: bool,
    /// The formula is only proven for `R > 4`.
    pub outside_hypothesis: bool,
}

impl LogCeiling {
    pub fn admits(&self, measured: f64) -> bool {
        if measured <= 0.0 {
            return true;
        }
        if self.overflowed {
            measured.ln() <= self.ln_value
        } else {
            measured <= self.value
        }
    }
}

/// `n⁴ exp(20 R²)`.
pub fn lipschitz_ceiling(n: usize, r: f64) -> LogCeiling {
    let ln_value = 4.0 * (n as f64).ln() + 20.0 * r * r;
    let overflowed = ln_value > 700.0;
    LogCeiling {
        ln_value,
        value: if overflowed { f64::INFINITY } else { ln_value.exp() },
        overflowed,
        outside_hypothesis: r <= 4.0,
    }
}

fn small_range_pair<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, y: &DVector<T>) -> Result<T> {
    if x.len() != instance.d() || y.len() != instance.d() {
        return Err(Error::DimensionMismatch {
            context: "point pair",
            expected: instance.d(),
            actual: x.len().max(y.len()),
        });
    }
    let gap = (&instance.a * (x - y)).amax();
    if gap >= lit(SMALL_RANGE) {
        return Err(Error::PreconditionViolated(format!(
            "‖A(x−y)‖_∞ = {gap} is not below {SMALL_RANGE}"
        )));
    }
    Ok(gap)
}

/// `‖H(x) − H(y)‖ / ‖x − y‖` (0 for coincident points).
pub fn empirical_lipschitz<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, y: &DVector<T>) -> Result<T> {
    small_range_pair(instance, x, y)?;
    let dist = (x - y).norm();
    if dist == T::zero() {
        return Ok(T::zero());
    }
    let hx = hessian(instance, &evaluate(instance, x)?)?;
    let hy = hessian(instance, &evaluate(instance, y)?)?;
    Ok(linalg::spectral_norm(&(hx - hy)) / dist)
}

/// `max{‖A‖, ‖x‖, ‖y‖, ‖b‖, 1}`, the smallest radius meeting every
/// hypothesis of the Lipschitz statements for this pair.
pub fn measured_radius<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, y: &DVector<T>) -> T {
    [linalg::spectral_norm(&instance.a), x.norm(), y.norm(), instance.b.norm()]
        .into_iter()
        .fold(T::one(), |m, v| m.max(v))
}

/// The five kernel differences and the bounds on their spectral norms.
#[derive(Debug, Clone, PartialEq)]
pub struct GTerms<T: Real> {
    pub norms: [T; 5],
    /// Per-term ceilings from the individual step bounds.
    pub term_bounds: [T; 5],
    pub sum: T,
    pub r_inf: T,
    pub r: T,
    pub delta_u: T,
    pub delta_v: T,
    pub delta_c: T,
    /// `20 R_∞³ max{‖Δu‖, ‖Δc‖}`.
    pub part1_bound: T,
    /// `100 R_∞³ R √n ‖Δu‖`.
    pub part2_bound: T,
    pub terms_hold: bool,
    pub part1_holds: bool,
    pub part2_holds: bool,
}

pub fn g_terms<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, y: &DVector<T>) -> Result<GTerms<T>> {
    small_range_pair(instance, x, y)?;
    let ex = evaluate(instance, x)?;
    let ey = evaluate(instance, y)?;
    let b = &instance.b;
    let (vx, vy, ux, uy, cx, cy) = (&ex.v, &ey.v, &ex.u, &ey.u, &ex.c, &ey.c);
    let vbx = vx.component_mul(b);
    let vby = vy.component_mul(b);
    let bb = b.norm_squared();
    let g1 = vx * vbx.transpose() - vy * vby.transpose();
    let g2 = &vbx * vx.transpose() - &vby * vy.transpose();
    let g3 = (vx * vx.transpose() - vy * vy.transpose()) * bb;
    let g4 = (ux + cx).component_mul(ux) - (uy + cy).component_mul(uy);
    let g5 = ux * cx.dot(b) - uy * cy.dot(b);
    let norms = [
        linalg::spectral_norm(&g1),
        linalg::spectral_norm(&g2),
        linalg::spectral_norm(&g3),
        g4.amax(),
        g5.amax(),
    ];
    let sum = norms.iter().fold(T::zero(), |s, v| s + *v);
    let delta_u = (ux - uy).norm();
    let delta_v = (vx - vy).norm();
    let delta_c = (cx - cy).norm();
    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let vmax = vx.norm().max(vy.norm());
    let ucmax = ux.norm().max(uy.norm()).max(cx.norm()).max(cy.norm());
    let bn = b.norm();
    let term_bounds = [
        two * vmax * bn * delta_v,
        two * vmax * bn * delta_v,
        two * vmax * bb * delta_v,
        four * ucmax * (delta_u + delta_c),
        four * ucmax * bn * (delta_u + delta_c),
    ];
    let rinf = r_inf_extended(&ex, &ey, b);
    let r = measured_radius(instance, x, y);
    let rinf3 = rinf * rinf * rinf;
    let part1_bound = lit::<T>(20.0) * rinf3 * delta_u.max(delta_c);
    let part2_bound = lit::<T>(100.0) * rinf3 * r * lit::<T>(instance.n() as f64).sqrt() * delta_u;
    let slack = T::one() + lit(PSD_SLACK);
    Ok(GTerms {
        norms,
        term_bounds,
        sum,
        r_inf: rinf,
        r,
        delta_u,
        delta_v,
        delta_c,
        part1_bound,
        part2_bound,
        terms_hold: norms.iter().zip(term_bounds.iter()).all(|(g, t)| *g <= *t * slack),
        part1_holds: sum <= part1_bound * slack,
        part2_holds: sum <= part2_bound * slack,
    })
}

/// Lipschitz chain for the basic quantities between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport<T: Real> {
    pub r: T,
    pub delta_x: T,
    pub delta_u: T,
    /// `2 √n R exp(R²) ‖x − y‖`.
    pub u_bound: T,
    pub delta_alpha: T,
    /// `√n ‖Δu‖`.
    pub alpha_bound: T,
    pub delta_c: T,
    /// `‖Δu‖ + |Δα| ‖b‖`.
    pub c_bound: T,
    pub holds_u: bool,
    pub holds_alpha: bool,
    pub holds_c: bool,
}

impl<T: Real> ChainReport<T> {
    pub fn all_hold(&self) -> bool {
        self.holds_u && self.holds_alpha && self.holds_c
    }
}

pub fn lipschitz_chain<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, y: &DVector<T>) -> Result<ChainReport<T>> {
    small_range_pair(instance, x, y)?;
    let ex = evaluate(instance, x)?;
    let ey = evaluate(instance, y)?;
    let r = measured_radius(instance, x, y);
    let sqrt_n = lit::<T>(instance.n() as f64).sqrt();
    let delta_x = (x - y).norm();
    let delta_u = (&ex.u - &ey.u).norm();
    let delta_alpha = (ex.alpha - ey.alpha).abs();
    let delta_c = (&ex.c - &ey.c).norm();
    let u_bound = lit::<T>(2.0) * sqrt_n * r * (r * r).exp() * delta_x;
    let alpha_bound = sqrt_n * delta_u;
    let c_bound = delta_u + delta_alpha * instance.b.norm();
    let slack = T::one() + lit(1e-12);
    Ok(ChainReport {
        r,
        delta_x,
        delta_u,
        u_bound,
        delta_alpha,
        alpha_bound,
        delta_c,
        c_bound,
        holds_u: delta_u <= u_bound * slack,
        holds_alpha: delta_alpha <= alpha_bound * slack,
        holds_c: delta_c <= c_bound * slack,
    })
}

/// One two-sided semidefinite sandwich `−C ⪯ M ⪯ C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichCheck {
    pub part: &'static str,
    /// `λ_min(C − M)` and `λ_min(C + M)`; both must be ≥ −slack.
    pub upper_margin: f64,
    pub lower_margin: f64,
    pub holds: bool,
}

fn sandwich<T: Real>(part: &'static str, m: &DMatrix<T>, ceiling: &DMatrix<T>) -> SandwichCheck {
    let sym = linalg::symmetrize(m);
    let upper = linalg::symmetric_eigenvalues(&(ceiling - &sym));
    let lower = linalg::symmetric_eigenvalues(&(ceiling + &sym));
    let scale = to_f64(linalg::spectral_norm(ceiling)).max(to_f64(linalg::spectral_norm(&sym)));
    let tol = PSD_SLACK * scale.max(f64::MIN_POSITIVE);
    let upper_margin = to_f64(upper[0]);
    let lower_margin = to_f64(lower[0]);
    SandwichCheck {
        part,
        upper_margin,
        lower_margin,
        holds: upper_margin >= -tol && lower_margin >= -tol,
    }
}

/// Block-level semidefinite bounds on the Hessian kernel at one point.
///
/// The two cross terms `−v(v∘b)ᵀ` and `−(v∘b)vᵀ` are not symmetric, and
/// a rank-one envelope `‖b‖ v vᵀ` cannot dominate them (any direction
/// nearly orthogonal to `v` but not to `v∘b` breaks it). Their symmetric
/// parts are checked against the operator-norm envelope `‖b‖ ‖v‖² I`
/// instead, which is what the aggregate `±10 R₀⁴ I` bound actually uses.
pub fn block_bounds<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<Vec<SandwichCheck>> {
    let view: HessianView<T> = hessian_blocks(instance, eval)?;
    let n = instance.n();
    let eye = DMatrix::<T>::identity(n, n);
    let (u, v, c, b) = (&eval.u, &eval.v, &eval.c, &instance.b);
    let bn = b.norm();
    let q: T = lit(instance.kind.q_offset());
    let cross = eye.clone() * (bn * v.norm_squared());
    let diag1 = DMatrix::from_diagonal(&(u + c).component_mul(u).add_scalar(q));
    let diag2 = DMatrix::from_diagonal(&(u * (-c.dot(b))));
    let uinf = u.amax();
    let cinf = c.amax();
    let rr = r0(eval, b);
    let rr2 = rr * rr;

    let mut checks = vec![
        sandwich("rank1: -v(v∘b)ᵀ within ±‖b‖‖v‖²I", &view.b13, &cross),
        sandwich("rank2: -(v∘b)vᵀ within ±‖b‖‖v‖²I", &view.b12, &cross),
    ];
    let rank3 = v * v.transpose() * b.norm_squared();
    let gap = to_f64((&view.b14 - &rank3).amax());
    let scale = to_f64(rank3.amax()).max(f64::MIN_POSITIVE);
    checks.push(SandwichCheck {
        part: "rank3: ‖b‖² v vᵀ identity",
        upper_margin: -gap,
        lower_margin: -gap,
        holds: gap <= 1e-12 * scale,
    });
    checks.push(sandwich(
        "diag1: within ±(1 + (‖u‖∞+‖c‖∞)‖u‖∞)I",
        &diag1,
        &(eye.clone() * (T::one() + (uinf + cinf) * uinf)),
    ));
    checks.push(sandwich(
        "diag2: within ±‖b‖‖c‖‖u‖∞ I",
        &diag2,
        &(eye.clone() * (bn * c.norm() * uinf)),
    ));
    checks.push(sandwich(
        "total: B within ±10R₀⁴ I",
        &view.b_full,
        &(eye * (lit::<T>(10.0) * rr2 * rr2)),
    ));
    Ok(checks)
}

/// Bundle of certificates at a point `x` and a nearby point `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCertificate<T: Real> {
    pub r0: T,
    pub r_inf: T,
    pub sigma_min: T,
    pub l: T,
    /// Lipschitz constant in force (the `n⁴ exp(20R²)` ceiling, saturated
    /// at `f64::MAX` when it overflows).
    pub m: f64,
    pub passed: Vec<(String, bool)>,
}

impl<T: Real> SpectralCertificate<T> {
    pub fn all_passed(&self) -> bool {
        self.passed.iter().all(|(_, ok)| *ok)
    }
}

/// Run the psd, dominance, block, Lipschitz and five-term checks for the
/// instance as given (its own weights), at `x` and the pair `(x, y)`.
pub fn certify<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, y: &DVector<T>, l: T) -> Result<SpectralCertificate<T>> {
    let ex = evaluate(instance, x)?;
    let ey = evaluate(instance, y)?;
    let view = hessian_blocks(instance, &ex)?;
    let sigma_min = linalg::min_singular_value(&instance.a);
    let rr0 = r0(&ex, &instance.b);
    let w2_min = instance
        .w
        .iter()
        .fold(T::max_value().unwrap_or(lit(f64::MAX)), |m, wi| m.min(*wi * *wi));
    let mut passed = Vec::new();
    for (mode, name) in [(WeightMode::Psd, "psd"), (WeightMode::Dominance, "dominance")] {
        let threshold = weight_threshold(rr0, sigma_min, l, mode)?;
        let admissible = w2_min >= threshold * (T::one() - lit(1e-12));
        let verdict = match mode {
            WeightMode::Psd => certify_psd(&view.h_full, l)?,
            WeightMode::Dominance => certify_dominance(&view.b_full, &instance.w).unwrap_or(false),
        };
        passed.push((format!("{name}: weights admissible"), admissible));
        // The conclusion is only owed when the hypothesis holds.
        passed.push((format!("{name}: conclusion"), verdict || !admissible));
    }
    for check in block_bounds(instance, &ex)? {
        passed.push((format!("block {}", check.part), check.holds));
    }
    let ratio = to_f64(empirical_lipschitz(instance, x, y)?);
    let radius = to_f64(measured_radius(instance, x, y));
    let ceiling = lipschitz_ceiling(instance.n(), radius);
    passed.push(("hessian lipschitz ≤ n⁴exp(20R²)".into(), ceiling.admits(ratio)));
    let g = g_terms(instance, x, y)?;
    passed.push(("five-term individual bounds".into(), g.terms_hold));
    passed.push(("five-term sum ≤ 20R∞³max(Δu,Δc)".into(), g.part1_holds));
    passed.push(("five-term sum ≤ 100R∞³R√n Δu".into(), g.part2_holds));
    let chain = lipschitz_chain(instance, x, y)?;
    passed.push(("‖Δu‖ ≤ 2√nR exp(R²)‖Δx‖".into(), chain.holds_u));
    passed.push(("|Δα| ≤ √n‖Δu‖".into(), chain.holds_alpha));
    passed.push(("‖Δc‖ ≤ ‖Δu‖ + |Δα|‖b‖".into(), chain.holds_c));
    Ok(SpectralCertificate {
        r0: rr0,
        r_inf: r_inf(&ex, &ey),
        sigma_min,
        l,
        m: if ceiling.overflowed { f64::MAX } else { ceiling.value },
        passed,
    })
}
