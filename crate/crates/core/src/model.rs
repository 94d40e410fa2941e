//! Problem data and zeroth-order evaluation: `u`, its companion `v`,
//! the normalizer `α`, the residual `c` and both loss terms.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::{linalg, lit, to_f64, Error, Real, Result};

/// Largest admissible `|(Ax)_i|`. `exp` overflows `f64` near 709 and the
/// loss squares `u`, so 80 keeps every intermediate finite.
pub const OVERFLOW_GUARD: f64 = 80.0;

/// The link function applied entrywise to `Ax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    Exp,
    Cosh,
    Sinh,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 3] = [FunctionKind::Exp, FunctionKind::Cosh, FunctionKind::Sinh];

    #[inline]
    pub fn apply<T: Real>(self, t: T) -> T {
        match self {
            FunctionKind::Exp => t.exp(),
            FunctionKind::Cosh => t.cosh(),
            FunctionKind::Sinh => t.sinh(),
        }
    }

    /// The derivative partner: exp ↦ exp, cosh ↦ sinh, sinh ↦ cosh.
    pub fn companion(self) -> FunctionKind {
        match self {
            FunctionKind::Exp => FunctionKind::Exp,
            FunctionKind::Cosh => FunctionKind::Sinh,
            FunctionKind::Sinh => FunctionKind::Cosh,
        }
    }

    /// Constant `q` with `v∘v = u∘u + q` entrywise.
    pub fn q_offset(self) -> f64 {
        match self {
            FunctionKind::Exp => 0.0,
            FunctionKind::Cosh => -1.0,
            FunctionKind::Sinh => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Exp => "exp",
            FunctionKind::Cosh => "cosh",
            FunctionKind::Sinh => "sinh",
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp" => Ok(FunctionKind::Exp),
            "cosh" => Ok(FunctionKind::Cosh),
            "sinh" => Ok(FunctionKind::Sinh),
            other => Err(Error::InvalidArgument(format!("unknown function kind {other:?}"))),
        }
    }
}

/// Fixed data of one regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub w: DVector<T>,
    pub kind: FunctionKind,
}

impl<T: Real> ProblemInstance<T> {
    pub fn new(a: DMatrix<T>, b: DVector<T>, w: DVector<T>, kind: FunctionKind) -> Result<Self> {
        let (n, d) = a.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInstance(format!("A must be non-empty, got {n}x{d}")));
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "b",
                expected: n,
                actual: b.len(),
            });
        }
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                context: "w",
                expected: n,
                actual: w.len(),
            });
        }
        let finite = |v: &T| to_f64(*v).is_finite();
        if !a.iter().all(finite) || !b.iter().all(finite) || !w.iter().all(finite) {
            return Err(Error::InvalidInstance("non-finite entry in A, b or w".into()));
        }
        Ok(Self { a, b, w, kind })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    /// Same `b`, `w` and kind with a different design matrix.
    pub fn with_matrix(&self, a: DMatrix<T>) -> Result<Self> {
        Self::new(a, self.b.clone(), self.w.clone(), self.kind)
    }

    pub fn with_weights(&self, w: DVector<T>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), w, self.kind)
    }

    /// Errors unless every weight is strictly positive.
    pub fn require_positive_weights(&self) -> Result<()> {
        match self.w.iter().position(|wi| *wi <= T::zero()) {
            Some(i) => Err(Error::PreconditionViolated(format!(
                "weight w[{i}] = {} must be strictly positive",
                self.w[i]
            ))),
            None => Ok(()),
        }
    }
}

/// Every point-dependent quantity at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T: Real> {
    pub x: DVector<T>,
    pub ax: DVector<T>,
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub alpha: T,
    pub c: DVector<T>,
    pub loss_u: T,
    pub loss_reg: T,
    pub loss: T,
}

pub fn evaluate<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>) -> Result<Evaluation<T>> {
    if x.len() != instance.d() {
        return Err(Error::DimensionMismatch {
            context: "x",
            expected: instance.d(),
            actual: x.len(),
        });
    }
    if !x.iter().all(|v| to_f64(*v).is_finite()) {
        return Err(Error::InvalidArgument("x has non-finite entries".into()));
    }
    let ax = &instance.a * x;
    let guard: T = lit(OVERFLOW_GUARD);
    if let Some(i) = ax.iter().position(|t| t.abs() > guard) {
        return Err(Error::OverflowGuard {
            index: i,
            value: to_f64(ax[i]),
            guard: OVERFLOW_GUARD,
        });
    }
    let kind = instance.kind;
    let u = ax.map(|t| kind.apply(t));
    let v = ax.map(|t| kind.companion().apply(t));
    let alpha = u.sum();
    let c = &u - &instance.b * alpha;
    let half: T = lit(0.5);
    let loss_u = c.norm_squared() * half;
    let loss_reg = instance.w.component_mul(&ax).norm_squared() * half;
    Ok(Evaluation {
        x: x.clone(),
        ax,
        u,
        v,
        alpha,
        c,
        loss_u,
        loss_reg,
        loss: loss_u + loss_reg,
    })
}

pub fn loss<T: Real>(instance: &ProblemInstance<T>, x: &DVector<T>) -> Result<T> {
    evaluate(instance, x).map(|e| e.loss)
}

/// Measured basic quantities against their radius-`R` ceilings.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T: Real> {
    pub r: T,
    pub u_norm: T,
    pub u_ceiling: T,
    pub alpha_abs: T,
    pub alpha_ceiling: T,
    pub c_norm: T,
    /// `2 n R exp(R²)`, the constant the derivation actually reaches.
    pub c_ceiling: T,
    /// `n R exp(R²)`, the tighter constant as stated; reported, not enforced.
    pub c_ceiling_stated: T,
    pub holds_u: bool,
    pub holds_alpha: bool,
    pub holds_c: bool,
    /// True when `R < 2`, below the radius the bounds are stated for.
    pub below_stated_radius: bool,
}

impl<T: Real> BoundReport<T> {
    pub fn all_hold(&self) -> bool {
        self.holds_u && self.holds_alpha && self.holds_c
    }
}

/// Check `‖u‖ ≤ √n e^{R²}`, `|α| ≤ n e^{R²}` and `‖c‖ ≤ 2nR e^{R²}`.
///
/// The radius hypotheses `‖A‖, ‖x‖, ‖b‖ ≤ R` are re-verified here.
pub fn check_norm_bounds<T: Real>(instance: &ProblemInstance<T>, eval: &Evaluation<T>, r: T) -> Result<BoundReport<T>> {
    if eval.x.len() != instance.d() || eval.u.len() != instance.n() {
        return Err(Error::DimensionMismatch {
            context: "evaluation",
            expected: instance.n(),
            actual: eval.u.len(),
        });
    }
    if !(r > T::zero()) {
        return Err(Error::PreconditionViolated(format!("radius R = {r} must be positive")));
    }
    let slack = T::one() + lit(1e-12);
    let a_norm = linalg::spectral_norm(&instance.a);
    for (name, value) in [("‖A‖", a_norm), ("‖x‖₂", eval.x.norm()), ("‖b‖₂", instance.b.norm())] {
        if value > r * slack {
            return Err(Error::PreconditionViolated(format!("{name} = {value} exceeds R = {r}")));
        }
    }
    let n: T = lit(instance.n() as f64);
    let e = (r * r).exp();
    let u_norm = eval.u.norm();
    let alpha_abs = eval.alpha.abs();
    let c_norm = eval.c.norm();
    let u_ceiling = n.sqrt() * e;
    let alpha_ceiling = n * e;
    let c_ceiling = lit::<T>(2.0) * n * r * e;
    Ok(BoundReport {
        r,
        u_norm,
        u_ceiling,
        alpha_abs,
        alpha_ceiling,
        c_norm,
        c_ceiling,
        c_ceiling_stated: n * r * e,
        holds_u: u_norm <= u_ceiling,
        holds_alpha: alpha_abs <= alpha_ceiling,
        holds_c: c_norm <= c_ceiling,
        below_stated_radius: r < lit(2.0),
    })
}

/// Small-range approximation: for `‖a − b‖_∞ ≤ 0.01`,
/// `‖f(a) − f(b)‖₂ ≤ ‖g(a)‖₂ · 2‖a − b‖_∞` where `g = f` for exp/cosh and
/// `g = cosh` for sinh. Returns `None` when the points are not close
/// enough for the statement to apply.
pub fn small_range_holds<T: Real>(kind: FunctionKind, a: &DVector<T>, b: &DVector<T>) -> Option<bool> {
    assert_eq!(a.len(), b.len());
    let gap = (a - b).amax();
    if gap > lit(0.01) {
        return None;
    }
    let diff = (a.map(|t| kind.apply(t)) - b.map(|t| kind.apply(t))).norm();
    let envelope_kind = match kind {
        FunctionKind::Sinh => FunctionKind::Cosh,
        k => k,
    };
    let envelope = a.map(|t| envelope_kind.apply(t)).norm();
    Some(diff <= envelope * lit(2.0) * gap)
}
