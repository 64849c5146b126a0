//! Dense symmetric linear algebra used by both solvers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. Factorizations are
//! delegated to nalgebra; this module fixes the conventions (symmetrize at
//! the boundary, Cholesky failure means "not positive definite").

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{CovselError, Result};

/// Relative scale used to classify an entry as numerically zero.
pub const ZERO_THRESHOLD_REL: f64 = 1e-8;

/// Returns `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    symmetrize_in_place(&mut out);
    out
}

pub fn symmetrize_in_place(a: &mut DMatrix<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn check_square(a: &DMatrix<f64>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(CovselError::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

pub fn cholesky(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone()).ok_or_else(|| CovselError::Domain(format!("{what} is not positive definite")))
}

pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite()) && Cholesky::new(a.clone()).is_some()
}

/// log det of a symmetric positive definite matrix, `2·Σ log Lᵢᵢ`.
pub fn log_det_spd(a: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = cholesky(a, what)?;
    Ok(log_det_from_cholesky(&chol))
}

pub fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn inverse_spd(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = cholesky(a, what)?;
    let mut inv = chol.inverse();
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors.
pub fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let mut vals = SymmetricEigen::new(symmetrize(a)).eigenvalues;
    vals.as_mut_slice().sort_by(f64::total_cmp);
    vals
}

/// True when every eigenvalue of the symmetric `a` lies strictly inside
/// `(lo, hi)`, decided by two Cholesky factorizations.
pub fn strictly_within_spectrum(a: &DMatrix<f64>, lo: f64, hi: f64) -> bool {
    if !a.iter().all(|v| v.is_finite()) {
        return false;
    }
    let mut below = a.clone();
    let mut above = -a;
    for i in 0..a.nrows() {
        below[(i, i)] -= lo;
        above[(i, i)] += hi;
    }
    Cholesky::new(below).is_some() && Cholesky::new(above).is_some()
}

/// `U·diag(values)·Uᵀ`, symmetrized.
pub fn from_eigen(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*v);
    }
    let mut out = scaled * vectors.transpose();
    symmetrize_in_place(&mut out);
    out
}

/// `U·diag(f(λ))·Uᵀ` for a symmetric input, without sorting the spectrum.
pub fn eigen_map(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    from_eigen(&eig.eigenvectors, &eig.eigenvalues.map(f))
}

/// Largest absolute eigenvalue; for PSD inputs this is the spectral norm.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let vals = sym_eigenvalues(a);
    vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Elementwise max-abs norm, `‖A‖_∞` in the entrywise sense.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Elementwise absolute sum over all entries, diagonal included.
pub fn l1_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Zero threshold for classifying entries of `x`: `1e-8·max(1, ‖x‖_∞)`.
pub fn zero_threshold(x: &DMatrix<f64>) -> f64 {
    ZERO_THRESHOLD_REL * max_abs(x).max(1.0)
}

/// Matrix with row and column `j` removed.
pub fn minor(a: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    a.clone().remove_row(j).remove_column(j)
}

/// Column `j` with its diagonal entry removed.
pub fn column_without_diag(a: &DMatrix<f64>, j: usize) -> DVector<f64> {
    let p = a.nrows();
    DVector::from_iterator(p - 1, (0..p).filter(|&i| i != j).map(|i| a[(i, j)]))
}

/// Scalar soft-threshold `sign(s)·max(|s|−t, 0)`.
#[inline]
pub fn soft_threshold(s: f64, t: f64) -> f64 {
    if s > t {
        s - t
    } else if s < -t {
        s + t
    } else {
        0.0
    }
}
