//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff below which a matrix is treated as
/// rank-deficient.
pub const SINGULAR_RATIO: f64 = 1e-10;

/// Largest singular value (operator norm for the Euclidean geometry).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Smallest and largest singular values.
pub fn singular_extrema(m: &DMatrix<f64>) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let sv = m.clone().singular_values();
    (sv.min(), sv.max())
}

/// `sigma_min / sigma_max`, the reciprocal condition number; 0 for empty
/// or exactly singular input.
pub fn inv_condition(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = singular_extrema(m);
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Solve the symmetric positive definite system `a x = b` via Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|chol| chol.solve(b))
}

/// Minimum-norm least-squares solution of `m x = b` through the SVD
/// pseudoinverse with relative cutoff [`SINGULAR_RATIO`].
///
/// Returns the solution together with the numerical rank.
pub fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let cut = max_sv * SINGULAR_RATIO;
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut coeff = u.transpose() * b;
    let mut rank = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > cut {
            coeff[i] /= *s;
            rank += 1;
        } else {
            coeff[i] = 0.0;
        }
    }
    (vt.transpose() * coeff, rank)
}

/// Extract the column submatrix `m[:, support]`.
pub fn columns(m: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, support.len(), |i, j| m[(i, support[j])])
}

/// Extract the subvector `v[support]`.
pub fn gather(v: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    DVector::from_fn(support.len(), |j, _| v[support[j]])
}

/// Indices of `0..d` not contained in the (sorted) support.
pub fn complement(support: &[usize], d: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(d - support.len());
    let mut it = support.iter().peekable();
    for k in 0..d {
        if it.peek() == Some(&&k) {
            it.next();
        } else {
            out.push(k);
        }
    }
    out
}
