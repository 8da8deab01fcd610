//! Small dense helpers shared by the covariance and likelihood code.

use nalgebra::{DMatrix, DVector};

/// Relative pivot tolerance used by [`cholesky`] for positive-definiteness.
pub const PD_PIVOT_TOL: f64 = 1e-10;

/// Lower Cholesky factor of a symmetric matrix.
///
/// Returns `None` when some pivot falls at or below `rel_tol * max(diag)`.
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &DMatrix<f64>, rel_tol: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return None;
    }
    let tol = rel_tol * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// `log det A` from its Cholesky factor.
pub fn chol_log_det(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Solves `A X = B` given the lower Cholesky factor of `A`.
pub fn chol_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let y = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has a positive diagonal");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("cholesky factor has a positive diagonal")
}

/// `A^{-1}` from its lower Cholesky factor, symmetrized.
pub fn chol_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let inv = chol_solve(l, &DMatrix::identity(n, n));
    symmetrize(&inv)
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Copies the lower triangle onto the upper triangle in place.
pub fn mirror_lower(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            a[(j, i)] = a[(i, j)];
        }
    }
}

/// Length of `vech` for a `p x p` matrix.
pub fn vech_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Half-vectorization: the lower triangle stacked column by column.
pub fn vech(a: &DMatrix<f64>) -> DVector<f64> {
    let p = a.nrows();
    let mut out = Vec::with_capacity(vech_len(p));
    for j in 0..p {
        for i in j..p {
            out.push(a[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Frobenius norm.
pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
