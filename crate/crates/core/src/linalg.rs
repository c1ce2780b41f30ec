//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Relative singular-value floor below which a matrix is treated as rank-deficient.
pub(crate) const RANK_RTOL: f64 = 1e-10;

/// Least-squares solution of `a x ≈ b`; `None` when `a` lacks full column rank.
pub(crate) fn lstsq(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    if a.ncols() == 0 {
        return Some(DVector::zeros(0));
    }
    if a.nrows() < a.ncols() {
        return None;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_RTOL * smax {
        return None;
    }
    svd.solve(b, 0.0).ok()
}

/// Orthogonal projector onto the complement of the column space of `a` (assumed full column rank).
pub(crate) fn complement_projector(a: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    let gram = a.adjoint() * a;
    let inv = gram.try_inverse()?;
    Some(DMatrix::identity(n, n) - a * inv * a.adjoint())
}

/// `true` when the columns of `a` are numerically dependent.
pub(crate) fn is_rank_deficient(a: &DMatrix<Complex64>) -> bool {
    if a.ncols() > a.nrows() {
        return true;
    }
    let sv = a.singular_values();
    let smax = sv.max();
    !(smax > 0.0) || sv.min() <= RANK_RTOL * smax
}
