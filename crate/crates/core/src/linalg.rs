//! Small dense helpers shared by the learners.

use faer::{Mat, MatRef};

use crate::error::{EgfError, Result};

/// `diag(s) * a`.
pub fn scale_rows(a: MatRef<'_, f64>, s: &[f64]) -> Mat<f64> {
    assert_eq!(a.nrows(), s.len());
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| s[i] * a[(i, j)])
}

/// `a^T diag(w) b`.
pub fn weighted_gram(a: MatRef<'_, f64>, w: &[f64], b: MatRef<'_, f64>) -> Mat<f64> {
    let wb = scale_rows(b, w);
    a.transpose() * wb.as_ref()
}

pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// `max |a^T diag(w) a - I|`.
pub fn orthonormality_defect(a: MatRef<'_, f64>, w: &[f64]) -> f64 {
    let g = weighted_gram(a, w, a);
    let mut m = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            m = m.max((g[(i, j)] - target).abs());
        }
    }
    m
}

/// Thin QR factor with the sign convention `R_ii >= 0`, which makes the
/// factor unique for full-column-rank input.
///
/// Fails when some `|R_ii|` falls below `rank_tol * max_i |R_ii|`.
pub fn qf_positive(a: MatRef<'_, f64>, rank_tol: f64) -> Result<Mat<f64>> {
    let (q, r) = thin_qr(a);
    let k = a.ncols();
    let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if k > 0 && (rmax == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= rank_tol * rmax)) {
        return Err(EgfError::Rank(format!(
            "QR of an {} x {k} matrix is rank deficient",
            a.nrows()
        )));
    }
    Ok(q)
}

/// Thin QR with `R_ii >= 0`; returns `(Q, R)`.
pub fn thin_qr(a: MatRef<'_, f64>) -> (Mat<f64>, Mat<f64>) {
    let k = a.ncols();
    if k == 0 {
        return (Mat::zeros(a.nrows(), 0), Mat::zeros(0, 0));
    }
    let qr = a.qr();
    let mut q = qr.compute_thin_Q();
    let mut r = qr.thin_R().to_owned();
    for i in 0..k.min(a.nrows()) {
        if r[(i, i)] < 0.0 {
            for row in 0..q.nrows() {
                q[(row, i)] = -q[(row, i)];
            }
            for col in 0..r.ncols() {
                r[(i, col)] = -r[(i, col)];
            }
        }
    }
    (q, r)
}

/// Copy of column `j` as a vector.
pub fn col_vec(a: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

/// Builds a matrix whose columns are the given vectors.
pub fn from_columns(nrows: usize, cols: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}
