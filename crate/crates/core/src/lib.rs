//! Regularized rescaled softmax regression with `exp`, `cosh` and `sinh`
//! link functions.
//!
//! The loss is
//!
//! ```text
//! L(x) = 0.5 ‖u(x) − ⟨u(x), 1⟩ b‖² + 0.5 ‖diag(w) A x‖²,   u(x) = f(Ax)
//! ```
//!
//! The crate provides zeroth/first/second order evaluation ([`model`],
//! [`calculus`]), numerical certificates for the structural bounds the
//! solver relies on ([`spectral`]), leverage-score row sampling of the
//! diagonal Hessian kernel ([`sketch`]), exact and sketched Newton
//! iterations with convergence auditing ([`solver`]) and target-shift
//! reconstruction under perturbations of `x` or `A` ([`shift`]).
//!
//! All numerics are generic over [`Real`] (implemented for `f32` and
//! `f64`); the `f64` aliases below are what most callers want.

pub mod calculus;
pub mod error;
pub mod linalg;
pub mod model;
pub mod shift;
pub mod sketch;
pub mod solver;
pub mod spectral;

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use error::{Error, Result};
pub use model::FunctionKind;

/// Scalar type the whole crate is generic over.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display + fmt::Debug {}

impl Real for f32 {}
impl Real for f64 {}

/// Lift an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

/// Lower a scalar to `f64` (lossless for `f32`/`f64`).
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

pub type ProblemInstance = model::ProblemInstance<f64>;
pub type Evaluation = model::Evaluation<f64>;
pub type BoundReport = model::BoundReport<f64>;
pub type HessianView = calculus::HessianView<f64>;
pub type SketchedDiagonal = sketch::SketchedDiagonal<f64>;
pub type ConvergenceTrace = solver::ConvergenceTrace<f64>;
pub type GoodnessCertificate = solver::GoodnessCertificate<f64>;
pub type ShiftResult = shift::ShiftResult<f64>;
pub type SpectralCertificate = spectral::SpectralCertificate<f64>;
