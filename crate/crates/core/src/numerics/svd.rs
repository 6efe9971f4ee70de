//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Pairs of columns are rotated until every pair is orthogonal to within
//! [`ORTHOGONALITY_TOL`] relative to the column norms. The column norms are
//! then the singular values and the accumulated rotations form `V`.

use super::ops::dot_unchecked;
use super::{DenseMatrix, NumericsError};

/// Default rank cut-off, relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Convergence threshold on `|a_p·a_q| / (‖a_p‖‖a_q‖)`.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// `M = U · diag(singular_values) · Vt`, truncated to the numerical rank.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `diag(s)·Vt`, the r × n matrix that has the same column Gram matrix as `M`.
    pub fn sigma_vt(&self) -> DenseMatrix {
        let mut out = self.vt.clone();
        for (i, &s) in self.singular_values.iter().enumerate() {
            for j in 0..out.cols() {
                out[(i, j)] *= s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            for i in 0..us.rows() {
                us[(i, j)] *= s;
            }
        }
        super::matmul(&us, &self.vt).expect("factor shapes chain")
    }
}

/// Thin SVD of `m`, dropping singular values `≤ rank_tol · s_max`.
pub fn svd(m: &DenseMatrix, rank_tol: f64) -> Result<SvdFactors, NumericsError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(NumericsError::Empty);
    }
    if m.rows() >= m.cols() {
        svd_tall(m, rank_tol)
    } else {
        let t = svd_tall(&m.transpose(), rank_tol)?;
        Ok(SvdFactors {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        })
    }
}

fn svd_tall(m: &DenseMatrix, rank_tol: f64) -> Result<SvdFactors, NumericsError> {
    let n = m.cols();
    let mut a = m.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = n < 2;
    let mut residual = 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        residual = 0.0_f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot_unchecked(&a[p], &a[p]);
                let beta = dot_unchecked(&a[q], &a[q]);
                let gamma = dot_unchecked(&a[p], &a[q]);
                if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                residual = residual.max(rel);
                if rel <= ORTHOGONALITY_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = residual <= ORTHOGONALITY_TOL;
    }
    if !converged {
        return Err(NumericsError::NoConvergence {
            algorithm: "one-sided Jacobi SVD",
            residual,
        });
    }

    let mut order: Vec<(f64, usize)> = a.iter().enumerate().map(|(j, c)| (dot_unchecked(c, c).sqrt(), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let s_max = order.first().map_or(0.0, |x| x.0);
    let kept: Vec<(f64, usize)> = order
        .into_iter()
        .filter(|&(s, _)| s > 0.0 && s > rank_tol * s_max)
        .collect();

    let r = kept.len();
    let mut u = DenseMatrix::zeros(m.rows(), r);
    let mut vt = DenseMatrix::zeros(r, n);
    let mut singular_values = Vec::with_capacity(r);
    for (k, &(s, j)) in kept.iter().enumerate() {
        singular_values.push(s);
        let col: Vec<f64> = a[j].iter().map(|x| x / s).collect();
        u.set_column(k, &col);
        for (i, &x) in v[j].iter().enumerate() {
            vt[(k, i)] = x;
        }
    }
    Ok(SvdFactors {
        u,
        singular_values,
        vt,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
