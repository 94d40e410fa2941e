//! Leverage-score row sampling of a positive diagonal `D` so that
//! `(1−ε) AᵀDA ⪯ AᵀD̃A ⪯ (1+ε) AᵀDA` with probability at least `1−δ`.
//!
//! Scores are exact (thin QR of `D^{1/2}A`), rows are kept independently
//! with probability `p_i = min(1, C τ_i ln(n/δ) / ε²)` and rescaled by
//! `1/p_i`, which keeps `E[AᵀD̃A] = AᵀDA` exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::PSD_SLACK;
use crate::{linalg, lit, to_f64, Error, Real, Result};

/// Oversampling constant `C` in the keep probability.
pub const OVERSAMPLING: f64 = 40.0;

/// Sparse diagonal `D̃` plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedDiagonal<T: Real> {
    pub indices: Vec<usize>,
    pub values: Vec<T>,
    pub n: usize,
    pub seed: u64,
    pub eps: f64,
    pub delta: f64,
    pub oversampling: f64,
    pub nnz: usize,
    /// `C · d · ln(n/δ) / ε²`.
    pub nnz_ceiling: f64,
}

impl<T: Real> SketchedDiagonal<T> {
    /// Full-length diagonal with zeros for dropped rows.
    pub fn to_dense(&self) -> DVector<T> {
        let mut out = DVector::zeros(self.n);
        for (&i, &v) in self.indices.iter().zip(self.values.iter()) {
            out[i] = v;
        }
        out
    }

    /// `Aᵀ D̃ A`, touching only the retained rows.
    pub fn gram(&self, a: &DMatrix<T>) -> DMatrix<T> {
        let d = a.ncols();
        let mut h = DMatrix::zeros(d, d);
        for (&i, &v) in self.indices.iter().zip(self.values.iter()) {
            let row = a.row(i);
            h += row.transpose() * row * v;
        }
        h
    }
}

fn check_diag<T: Real>(a: &DMatrix<T>, d_diag: &DVector<T>) -> Result<()> {
    if d_diag.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "diagonal",
            expected: a.nrows(),
            actual: d_diag.len(),
        });
    }
    match d_diag.iter().position(|v| !(*v > T::zero())) {
        Some(index) => Err(Error::NonPositiveDiagonal {
            index,
            value: to_f64(d_diag[index]),
        }),
        None => Ok(()),
    }
}

/// Squared row norms of the orthonormal factor of `diag(d)^{1/2} A`.
pub fn leverage_scores<T: Real>(a: &DMatrix<T>, d_diag: &DVector<T>) -> Result<DVector<T>> {
    check_diag(a, d_diag)?;
    let (n, d) = a.shape();
    if n < d {
        return Err(Error::RankDeficient { rank: n, d });
    }
    let mut weighted = a.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= d_diag[i].sqrt();
    }
    let qr = weighted.qr();
    let r = qr.r();
    let diag_max = (0..d).fold(T::zero(), |m, k| m.max(r[(k, k)].abs()));
    let tol = diag_max * lit(1e-12) * lit(n.max(d) as f64);
    let rank = (0..d).filter(|&k| r[(k, k)].abs() > tol).count();
    if rank < d {
        return Err(Error::RankDeficient { rank, d });
    }
    let q = qr.q();
    Ok(DVector::from_fn(n, |i, _| q.row(i).norm_squared()))
}

fn check_params(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::InvalidEps(eps));
    }
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::InvalidDelta(delta));
    }
    Ok(())
}

/// Keep probabilities `min(1, C τ_i ln(n/δ) / ε²)`.
pub fn keep_probabilities<T: Real>(scores: &DVector<T>, eps: f64, delta: f64, oversampling: f64) -> DVector<T> {
    let n = scores.len() as f64;
    let factor: T = lit(oversampling * (n / delta).ln() / (eps * eps));
    scores.map(|t| (t * factor).min(T::one()))
}

pub fn subsample<T: Real>(a: &DMatrix<T>, d_diag: &DVector<T>, eps: f64, delta: f64, seed: u64) -> Result<SketchedDiagonal<T>> {
    subsample_with_oversampling(a, d_diag, eps, delta, seed, OVERSAMPLING)
}

pub fn subsample_with_oversampling<T: Real>(
    a: &DMatrix<T>,
    d_diag: &DVector<T>,
    eps: f64,
    delta: f64,
    seed: u64,
    oversampling: f64,
) -> Result<SketchedDiagonal<T>> {
    check_params(eps, delta)?;
    if !(oversampling > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "oversampling constant {oversampling} must be positive"
        )));
    }
    let scores = leverage_scores(a, d_diag)?;
    let probs = keep_probabilities(&scores, eps, delta, oversampling);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        // Draw for every row so the stream position does not depend on p.
        let draw: f64 = rng.random();
        if p >= T::one() || (p > T::zero() && draw < to_f64(p)) {
            indices.push(i);
            values.push(d_diag[i] / p);
        }
    }
    let (n, d) = a.shape();
    let nnz = indices.len();
    Ok(SketchedDiagonal {
        indices,
        values,
        n,
        seed,
        eps,
        delta,
        oversampling,
        nnz,
        nnz_ceiling: oversampling * d as f64 * (n as f64 / delta).ln() / (eps * eps),
    })
}

/// Generalized spectrum of `(AᵀD̃A, AᵀDA)`: `(λ_min, λ_max)`.
pub fn sandwich_spectrum<T: Real>(a: &DMatrix<T>, d_diag: &DVector<T>, sketched: &SketchedDiagonal<T>) -> Result<(T, T)> {
    if d_diag.len() != a.nrows() || sketched.n != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "sketch rows",
            expected: a.nrows(),
            actual: sketched.n,
        });
    }
    let base = linalg::weighted_gram(a, d_diag);
    let approx = sketched.gram(a);
    let ev = linalg::pencil_eigenvalues(&approx, &base).ok_or(Error::IndefiniteBase)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

/// True iff every eigenvalue of the whitened `AᵀD̃A` lies in `[1−ε, 1+ε]`.
pub fn verify_sandwich<T: Real>(a: &DMatrix<T>, d_diag: &DVector<T>, sketched: &SketchedDiagonal<T>, eps: f64) -> Result<bool> {
    let (lo, hi) = sandwich_spectrum(a, d_diag, sketched)?;
    let (lo, hi) = (to_f64(lo), to_f64(hi));
    Ok(lo >= (1.0 - eps) - PSD_SLACK && hi <= (1.0 + eps) + PSD_SLACK)
}
