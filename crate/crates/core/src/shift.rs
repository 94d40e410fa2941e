//! Target shifts: moving `x` (or `A`) changes `c`, and the same loss value
//! is reproduced at the old point against the shifted target
//! `b − δ_b` with `δ_b = α⁻¹(c_next − c_t)`.

use nalgebra::{DMatrix, DVector};

use crate::model::{evaluate, Evaluation, FunctionKind, ProblemInstance};
use crate::spectral::SMALL_RANGE;
use crate::{linalg, lit, to_f64, Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftResult<T: Real> {
    pub delta_b: DVector<T>,
    /// `| ‖u_next − α_next b‖² − ‖u_t − α_t (b − δ_b)‖² |`.
    pub reconstruction_residual: T,
    /// The residual divided by `max(‖c_next‖², tiny)`.
    pub reconstruction_relative: f64,
    pub alpha_inverse: T,
    /// `| ‖δ_b‖ − |α⁻¹|·‖Δc‖ |` relative to `‖δ_b‖`.
    pub closed_form_gap: f64,
    /// `β · (1 + √n‖b‖) · 2√nR e^{R²} · ‖Δ‖` with `β` bounding `|α⁻¹|`.
    pub bound_value: T,
    pub within_bound: bool,
    /// `|α⁻¹| ≤ e^{R²}`; only asserted for the exponential kind.
    pub alpha_inverse_bound_holds: Option<bool>,
    pub delta_u_norm: T,
    pub delta_c_norm: T,
    /// `‖Δu‖ ≤ 2√nR e^{R²} ‖Δ‖`.
    pub u_lipschitz_holds: bool,
    pub radius: T,
}

fn alpha_inverse<T: Real>(e: &Evaluation<T>) -> Result<T> {
    let scale = e.u.iter().fold(T::zero(), |s, v| s + v.abs()).max(T::one());
    if e.alpha.abs() <= lit::<T>(1e-12) * scale {
        return Err(Error::AlphaZero(to_f64(e.alpha)));
    }
    Ok(T::one() / e.alpha)
}

fn assemble<T: Real>(
    kind: FunctionKind,
    b: &DVector<T>,
    et: &Evaluation<T>,
    en: &Evaluation<T>,
    radius: T,
    change: T,
) -> Result<ShiftResult<T>> {
    let n = b.len();
    let inv = alpha_inverse(et)?;
    let dc = &en.c - &et.c;
    let delta_b = &dc * inv;

    let lhs = en.c.norm_squared();
    let rebuilt = &et.u - (b - &delta_b) * et.alpha;
    let rhs = rebuilt.norm_squared();
    let residual = (lhs - rhs).abs();
    let reconstruction_relative = to_f64(residual) / to_f64(lhs).max(f64::MIN_POSITIVE);

    let delta_b_norm = delta_b.norm();
    let predicted = inv.abs() * dc.norm();
    let closed_form_gap = to_f64((delta_b_norm - predicted).abs()) / to_f64(delta_b_norm).max(f64::MIN_POSITIVE);

    let sqrt_n: T = lit((n as f64).sqrt());
    let growth = radius.powi(2).exp();
    let u_constant = lit::<T>(2.0) * sqrt_n * radius * growth;
    let beta = match kind {
        FunctionKind::Exp | FunctionKind::Cosh => growth,
        FunctionKind::Sinh => inv.abs(),
    };
    let bound_value = beta * (T::one() + sqrt_n * b.norm()) * u_constant * change;
    let delta_u_norm = (&en.u - &et.u).norm();
    let slack = T::one() + lit::<T>(1e-12);

    Ok(ShiftResult {
        reconstruction_residual: residual,
        reconstruction_relative,
        alpha_inverse: inv,
        closed_form_gap,
        within_bound: delta_b_norm <= bound_value * slack,
        bound_value,
        alpha_inverse_bound_holds: (kind == FunctionKind::Exp).then(|| inv.abs() <= growth * slack),
        delta_u_norm,
        delta_c_norm: dc.norm(),
        u_lipschitz_holds: delta_u_norm <= u_constant * change * slack,
        radius,
        delta_b,
    })
}

fn infinity_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Shift induced by moving from `x_t` to `x_next` under a fixed `A`.
pub fn shift_in_x<T: Real>(instance: &ProblemInstance<T>, x_t: &DVector<T>, x_next: &DVector<T>) -> Result<ShiftResult<T>> {
    let et = evaluate(instance, x_t)?;
    let en = evaluate(instance, x_next)?;
    let moved = infinity_norm(&(&en.ax - &et.ax));
    if moved > lit(SMALL_RANGE) {
        return Err(Error::PreconditionViolated(format!("‖AΔx‖∞ = {moved} exceeds {SMALL_RANGE}")));
    }
    let radius = [
        linalg::spectral_norm(&instance.a),
        x_t.norm(),
        x_next.norm(),
        instance.b.norm(),
        T::one(),
    ]
    .into_iter()
    .fold(T::zero(), |m, v| m.max(v));
    assemble(instance.kind, &instance.b, &et, &en, radius, (x_next - x_t).norm())
}

/// Shift induced by replacing `A_t` with `A_next` at a fixed `x`. Targets
/// and weights are taken from `instance_t`.
pub fn shift_in_a<T: Real>(instance_t: &ProblemInstance<T>, instance_next: &ProblemInstance<T>, x: &DVector<T>) -> Result<ShiftResult<T>> {
    if instance_t.a.shape() != instance_next.a.shape() {
        return Err(Error::DimensionMismatch {
            context: "replacement matrix",
            expected: instance_t.n(),
            actual: instance_next.n(),
        });
    }
    if instance_t.kind != instance_next.kind {
        return Err(Error::InvalidArgument("both instances must use the same function kind".into()));
    }
    let et = evaluate(instance_t, x)?;
    let en = evaluate(instance_next, x)?;
    let moved = infinity_norm(&(&en.ax - &et.ax));
    if moved > lit(SMALL_RANGE) {
        return Err(Error::PreconditionViolated(format!("‖ΔA x‖∞ = {moved} exceeds {SMALL_RANGE}")));
    }
    let delta_a: DMatrix<T> = &instance_next.a - &instance_t.a;
    let radius = [
        linalg::spectral_norm(&instance_t.a),
        linalg::spectral_norm(&instance_next.a),
        x.norm(),
        instance_t.b.norm(),
        T::one(),
    ]
    .into_iter()
    .fold(T::zero(), |m, v| m.max(v));
    assemble(instance_t.kind, &instance_t.b, &et, &en, radius, linalg::spectral_norm(&delta_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn exp_identity() -> ProblemInstance<f64> {
        ProblemInstance::new(
            DMatrix::identity(2, 2),
            dvector![0.5, 0.5],
            DVector::from_element(2, 1.0),
            FunctionKind::Exp,
        )
        .unwrap()
    }

    #[test]
    fn no_move_no_shift() {
        let inst = exp_identity();
        let x = dvector![0.2, -0.1];
        let s = shift_in_x(&inst, &x, &x).unwrap();
        assert_eq!(s.delta_b, DVector::zeros(2));
        assert_eq!(s.reconstruction_residual, 0.0);
        assert!(s.within_bound);
        let s = shift_in_a(&inst, &inst, &x).unwrap();
        assert_eq!(s.delta_b, DVector::zeros(2));
    }

    #[test]
    fn exp_identity_shift_closed_form() {
        let inst = exp_identity();
        let s = shift_in_x(&inst, &dvector![0.0, 0.0], &dvector![0.01, 0.0]).unwrap();
        let expected = 0.01f64.exp_m1() / 4.0;
        assert!((s.delta_b[0] - expected).abs() < 1e-15);
        assert!((s.delta_b[1] + expected).abs() < 1e-15);
        assert!((s.delta_b[0] - 0.0025125).abs() < 1e-7);
        assert!(s.reconstruction_relative < 1e-10);
        assert!(s.closed_form_gap < 1e-12);
        assert!(s.within_bound && s.u_lipschitz_holds);
        assert_eq!(s.alpha_inverse_bound_holds, Some(true));
    }

    #[test]
    fn sinh_at_origin_has_no_inverse() {
        let inst = ProblemInstance::new(
            DMatrix::identity(2, 2),
            dvector![0.5, 0.5],
            DVector::from_element(2, 1.0),
            FunctionKind::Sinh,
        )
        .unwrap();
        let r = shift_in_x(&inst, &dvector![0.0, 0.0], &dvector![0.001, 0.0]);
        assert!(matches!(r, Err(Error::AlphaZero(_))));
    }

    #[test]
    fn large_move_is_rejected() {
        let inst = exp_identity();
        let r = shift_in_x(&inst, &dvector![0.0, 0.0], &dvector![0.5, 0.0]);
        assert!(matches!(r, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn matrix_shift_small_perturbation() {
        let a = DMatrix::from_fn(5, 2, |i, j| ((i + 2 * j) as f64 * 0.37).sin() * 0.4);
        let inst = ProblemInstance::new(
            a.clone(),
            DVector::from_element(5, 0.2),
            DVector::from_element(5, 1.0),
            FunctionKind::Exp,
        )
        .unwrap();
        let mut bumped = a;
        bumped[(3, 1)] += 1e-3;
        let next = inst.with_matrix(bumped).unwrap();
        let s = shift_in_a(&inst, &next, &dvector![0.6, -0.3]).unwrap();
        assert!(s.within_bound && s.u_lipschitz_holds);
        assert!(s.reconstruction_relative < 1e-10);
    }
}
