//! Dense linear algebra wrappers (faer) and a rectangular assignment solver.

use crate::error::{Error, Result};
use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::Mat;
use num_complex::Complex64 as C64;

pub type CMat = Mat<C64>;

pub fn cmat(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> CMat {
    Mat::from_fn(rows, cols, f)
}

/// Eigenvalues and right eigenvectors (columns, unit 2-norm).
pub fn eigen(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    if a.nrows() == 0 {
        return Ok((vec![], Mat::zeros(0, 0)));
    }
    let e = a.eigen().map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let vals: Vec<C64> = e.S().column_vector().iter().copied().collect();
    let mut vecs = e.U().to_owned();
    for j in 0..vecs.ncols() {
        let n = (0..vecs.nrows()).map(|i| vecs[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            for i in 0..vecs.nrows() {
                vecs[(i, j)] /= n;
            }
        }
    }
    Ok((vals, vecs))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(vec![]);
    }
    a.eigenvalues().map_err(|e| Error::Numerical(format!("eigenvalues failed: {e:?}")))
}

/// Singular values in ascending order.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(vec![]);
    }
    let mut s = a.singular_values().map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Solves A x = b for square A by partial-pivoting LU.
pub fn solve(a: &CMat, b: &[C64]) -> Result<Vec<C64>> {
    let n = a.nrows();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("LU solve produced non-finite values".into()));
    }
    Ok(out)
}

/// Real least squares min ‖A x − b‖ via QR.
pub fn lstsq_real(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = Mat::from_fn(a.nrows(), 1, |i, _| b[i]);
    let x = a.qr().solve_lstsq(&rhs);
    let out: Vec<f64> = (0..a.ncols()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("least-squares solve produced non-finite values".into()));
    }
    Ok(out)
}

/// 2-norm condition number of a small complex matrix.
pub fn condition_number(a: &CMat) -> Result<f64> {
    let s = singular_values(a)?;
    let (lo, hi) = (s[0], s[s.len() - 1]);
    Ok(if lo == 0.0 { f64::INFINITY } else { hi / lo })
}

/// Minimum-cost assignment of every row to a distinct column (rows ≤ cols).
/// `cost` is row-major `rows × cols`; returns the column of each row.
pub fn assignment(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "assignment needs rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return vec![];
    }
    // Shortest augmenting paths with potentials, 1-based internally.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
