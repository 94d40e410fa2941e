#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rescaled_core::linalg::spectral_norm;
use rescaled_core::model::{FunctionKind, ProblemInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, norm: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = spectral_norm(&a);
    a * (norm / s)
}

/// Instance with `‖A‖ = radius`, `‖b‖ = radius / 2`, unit weights and a
/// point with `‖x‖ = 0.8 radius`.
pub fn seeded(seed: u64, kind: FunctionKind, n: usize, d: usize, radius: f64) -> (ProblemInstance<f64>, DVector<f64>) {
    let mut r = rng(seed);
    let a = gaussian_matrix(&mut r, n, d, radius);
    let b = gaussian_vector(&mut r, n);
    let b = &b * (0.5 * radius / b.norm());
    let x = gaussian_vector(&mut r, d);
    let x = &x * (0.8 * radius / x.norm());
    let inst = ProblemInstance::new(a, b, DVector::from_element(n, 1.0), kind).unwrap();
    (inst, x)
}

/// Unit direction scaled so that `‖A h‖∞ = gap`.
pub fn nearby(inst: &ProblemInstance<f64>, x: &DVector<f64>, rng: &mut ChaCha8Rng, gap: f64) -> DVector<f64> {
    let h = gaussian_vector(rng, inst.d());
    let ah = (&inst.a * &h).amax();
    x + h * (gap / ah)
}

pub fn f(kind: FunctionKind, t: f64) -> f64 {
    match kind {
        FunctionKind::Exp => t.exp(),
        FunctionKind::Cosh => t.cosh(),
        FunctionKind::Sinh => t.sinh(),
    }
}

/// Loss written out directly, independent of the library evaluation.
pub fn reference_loss(inst: &ProblemInstance<f64>, x: &DVector<f64>) -> f64 {
    let ax = &inst.a * x;
    let u: Vec<f64> = ax.iter().map(|t| f(inst.kind, *t)).collect();
    let alpha: f64 = u.iter().sum();
    let data: f64 = u.iter().zip(inst.b.iter()).map(|(ui, bi)| (ui - alpha * bi).powi(2)).sum();
    let reg: f64 = ax.iter().zip(inst.w.iter()).map(|(t, w)| (w * t).powi(2)).sum();
    0.5 * data + 0.5 * reg
}

pub fn reference_gradient(inst: &ProblemInstance<f64>, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(inst.d(), |j, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        (reference_loss(inst, &xp) - reference_loss(inst, &xm)) / (2.0 * h)
    })
}

pub fn relative(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}
