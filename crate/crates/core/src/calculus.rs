//! Gradient, Hessian and the diagonal Hessian surrogate, plus
//! central-difference oracles used to validate them.
//!
//! The Hessian of the data term is `Aᵀ B(x) A` with `B` the sum of six
//! n×n blocks built from `u`, its companion `v`, `c` and `b`:
//!
//! ```text
//! B₁₁ = diag(v∘v)          B₁₂ = −(v∘b) vᵀ      B₁₃ = −v (v∘b)ᵀ
//! B₁₄ = ‖b‖² v vᵀ          B₂₁ = diag(c∘u)      B₂₂ = −⟨c,b⟩ diag(u)
//! ```
//!
//! The regularizer adds `Aᵀ W² A`. The solver only ever sees the diagonal
//! part `diag((u+c)∘u + q) − ⟨c,b⟩ diag(u) + W²`, which equals
//! `diag(B₁₁ + B₂₁ + B₂₂) + W²` through `v∘v = u∘u + q`.

use nalgebra::{DMatrix, DVector};

use crate::model::{evaluate, Evaluation, ProblemInstance};
use crate::{linalg, lit, Error, Real, Result};

/// Dense n×n blocks are only materialized up to this many rows.
pub const DENSE_LIMIT: usize = 2000;
pub const FD_GRADIENT_STEP: f64 = 1e-5;
pub const FD_HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct HessianView<T: Real> {
    pub b11: DMatrix<T>,
    pub b12: DMatrix<T>,
    pub b13: DMatrix<T>,
    pub b14: DMatrix<T>,
    pub b21: DMatrix<T>,
    pub b22: DMatrix<T>,
    pub b_full: DMatrix<T>,
    /// `(u+c)∘u + q − ⟨c,b⟩ u + w∘w`.
    pub diag_surrogate: DVector<T>,
    /// `Aᵀ (B + W²) A`.
    pub h_full: DMatrix<T>,
}

/// The rank/diagonal split of `B`, written with `u` in the rank terms.
/// Coincides with the six-block form only for `exp` (where `u = v`).
#[derive(Debug, Clone, PartialEq)]
pub struct RankDiagSplit<T: Real> {
    pub rank1: DMatrix<T>,
    pub rank2: DMatrix<T>,
    pub rank3: DMatrix<T>,
    pub diag1: DVector<T>,
    pub diag2: DVector<T>,
}

impl<T: Real> RankDiagSplit<T> {
    pub fn total(&self) -> DMatrix<T> {
        &self.rank1 + &self.rank2 + &self.rank3 + DMatrix::from_diagonal(&(&self.diag1 + &self.diag2))
    }
}

fn check_eval<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<()> {
    if eval.x.len() != instance.d() {
        return Err(Error::DimensionMismatch {
            context: "evaluation x",
            expected: instance.d(),
            actual: eval.x.len(),
        });
    }
    if eval.u.len() != instance.n() {
        return Err(Error::DimensionMismatch {
            context: "evaluation u",
            expected: instance.n(),
            actual: eval.u.len(),
        });
    }
    Ok(())
}

/// `Aᵀ(c∘v − v⟨b,c⟩) + Aᵀ W² A x`.
pub fn gradient<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<DVector<T>> {
    check_eval(instance, eval)?;
    let bc = instance.b.dot(&eval.c);
    let w2 = instance.w.component_mul(&instance.w);
    let inner = eval.c.component_mul(&eval.v) - &eval.v * bc + w2.component_mul(&eval.ax);
    Ok(instance.a.tr_mul(&inner))
}

/// Diagonal of `B_diag + W²`: `(u+c)∘u + q − ⟨c,b⟩u + w∘w`.
pub fn diag_surrogate<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<DVector<T>> {
    check_eval(instance, eval)?;
    let q: T = lit(instance.kind.q_offset());
    let cb = eval.c.dot(&instance.b);
    Ok(DVector::from_fn(instance.n(), |i, _| {
        (eval.u[i] + eval.c[i]) * eval.u[i] + q - cb * eval.u[i] + instance.w[i] * instance.w[i]
    }))
}

/// Full d×d Hessian without n×n intermediates:
/// `Aᵀ diag(v² + c∘u − ⟨c,b⟩u + w²) A − p sᵀ − s pᵀ + ‖b‖² s sᵀ`
/// with `s = Aᵀv`, `p = Aᵀ(v∘b)`.
pub fn hessian<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<DMatrix<T>> {
    check_eval(instance, eval)?;
    let cb = eval.c.dot(&instance.b);
    let diag = DVector::from_fn(instance.n(), |i, _| {
        eval.v[i] * eval.v[i] + eval.c[i] * eval.u[i] - cb * eval.u[i] + instance.w[i] * instance.w[i]
    });
    let mut h = linalg::weighted_gram(&instance.a, &diag);
    let s = instance.a.tr_mul(&eval.v);
    let p = instance.a.tr_mul(&eval.v.component_mul(&instance.b));
    let bb = instance.b.norm_squared();
    h -= &p * s.transpose();
    h -= &s * p.transpose();
    h += &s * s.transpose() * bb;
    Ok(linalg::symmetrize(&h))
}

/// Materialize all six blocks, their sum, the surrogate and `Aᵀ(B+W²)A`.
pub fn hessian_blocks<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<HessianView<T>> {
    check_eval(instance, eval)?;
    let n = instance.n();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    let (u, v, c, b) = (&eval.u, &eval.v, &eval.c, &instance.b);
    let vb = v.component_mul(b);
    let cb = c.dot(b);
    let b11 = DMatrix::from_diagonal(&v.component_mul(v));
    let b12 = -(&vb * v.transpose());
    let b13 = -(v * vb.transpose());
    let b14 = v * v.transpose() * b.norm_squared();
    let b21 = DMatrix::from_diagonal(&c.component_mul(u));
    let b22 = DMatrix::from_diagonal(&(u * (-cb)));
    let b_full = &b11 + &b12 + &b13 + &b14 + &b21 + &b22;
    let w2 = instance.w.component_mul(&instance.w);
    let kernel = &b_full + DMatrix::from_diagonal(&w2);
    let h_full = instance.a.transpose() * kernel * &instance.a;
    Ok(HessianView {
        b11,
        b12,
        b13,
        b14,
        b21,
        b22,
        b_full,
        diag_surrogate: diag_surrogate(instance, eval)?,
        h_full,
    })
}

/// `B_rank¹ = −u(u∘b)ᵀ`, `B_rank² = −(u∘b)uᵀ`, `B_rank³ = ‖b‖² u uᵀ`,
/// `B_diag¹ = (u+c)∘u + q`, `B_diag² = −⟨c,b⟩u`.
pub fn rank_diag_split<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>) -> Result<RankDiagSplit<T>> {
    check_eval(instance, eval)?;
    let n = instance.n();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    let (u, c, b) = (&eval.u, &eval.c, &instance.b);
    let ub = u.component_mul(b);
    let q: T = lit(instance.kind.q_offset());
    let cb = c.dot(b);
    Ok(RankDiagSplit {
        rank1: -(u * ub.transpose()),
        rank2: -(&ub * u.transpose()),
        rank3: u * u.transpose() * b.norm_squared(),
        diag1: (u + c).component_mul(u).add_scalar(q),
        diag2: u * (-cb),
    })
}

/// Central differences of the loss.
pub fn fd_gradient<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, step: T) -> Result<DVector<T>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {step} must be positive")));
    }
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        let plus = evaluate(instance, &probe)?.loss;
        probe[j] = x[j] - step;
        let minus = evaluate(instance, &probe)?.loss;
        probe[j] = x[j];
        g[j] = (plus - minus) / (step + step);
    }
    Ok(g)
}

/// Central differences of the analytic gradient (column `j` is the
/// derivative along `e_j`).
pub fn fd_hessian<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>, step: T) -> Result<DMatrix<T>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {step} must be positive")));
    }
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let mut probe = x.clone();
    for j in 0..d {
        probe[j] = x[j] + step;
        let plus = gradient(instance, &evaluate(instance, &probe)?)?;
        probe[j] = x[j] - step;
        let minus = gradient(instance, &evaluate(instance, &probe)?)?;
        probe[j] = x[j];
        h.set_column(j, &((plus - minus) / (step + step)));
    }
    Ok(h)
}
