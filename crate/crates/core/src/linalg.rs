//! Dense linear-algebra helpers shared by the certificates and the solver.
//!
//! Everything here is exact up to floating point (SVD, symmetric eigen,
//! Cholesky); nothing is iterative-with-tolerance.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::{lit, to_f64, Error, Real, Result};

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone().singular_values().max()
}

/// Smallest singular value of a tall (or square) matrix; zero when the
/// matrix has fewer rows than columns.
pub fn min_singular_value<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() || m.nrows() < m.ncols() {
        return T::zero();
    }
    m.clone().singular_values().min()
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

/// `max |M - Mᵀ| / max |M|` (zero for the zero matrix).
pub fn relative_asymmetry<T: Real>(m: &DMatrix<T>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = to_f64(max_abs(m));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max(to_f64((m[(i, j)] - m[(j, i)]).abs()));
        }
    }
    worst / scale
}

pub fn ensure_symmetric<T: Real>(m: &DMatrix<T>, tol: f64) -> Result<()> {
    let asym = relative_asymmetry(m);
    if asym > tol {
        return Err(Error::NonSymmetric(asym));
    }
    Ok(())
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half: T = lit(0.5);
    (m + m.transpose()) * half
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let mut ev: Vec<T> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
    DVector::from_vec(ev)
}

/// Generalized eigenvalues of the symmetric pencil `(num, den)` with `den`
/// positive definite, computed by Cholesky whitening: the spectrum of
/// `L⁻¹ num L⁻ᵀ` where `den = L Lᵀ`. Ascending. `None` if `den` is not
/// positive definite.
pub fn pencil_eigenvalues<T: Real>(num: &DMatrix<T>, den: &DMatrix<T>) -> Option<DVector<T>> {
    let chol = Cholesky::new(symmetrize(den))?;
    let l = chol.l();
    let left = l.solve_lower_triangular(&symmetrize(num))?;
    let whitened = l.solve_lower_triangular(&left.transpose())?;
    Some(symmetric_eigenvalues(&whitened))
}

/// Solve `H z = g` for symmetric positive-definite `H`.
pub fn spd_solve<T: Real>(h: &DMatrix<T>, g: &DVector<T>) -> Result<DVector<T>> {
    let chol = Cholesky::new(symmetrize(h)).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(g))
}

/// `Aᵀ diag(s) A` without forming the n×n diagonal.
pub fn weighted_gram<T: Real>(a: &DMatrix<T>, s: &DVector<T>) -> DMatrix<T> {
    let mut scaled = a.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= s[i];
    }
    a.transpose() * scaled
}

/// Relative distance `‖a − b‖ / max(‖a‖, ‖b‖, floor)` in the 2-norm.
pub fn relative_error<T: Real>(a: &DVector<T>, b: &DVector<T>, floor: f64) -> f64 {
    let num = to_f64((a - b).norm());
    let den = to_f64(a.norm()).max(to_f64(b.norm())).max(floor);
    num / den
}
