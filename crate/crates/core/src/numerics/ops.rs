use super::{DenseMatrix, NumericsError};

/// `A·B` with plain `f64` accumulation.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
    if a.cols() != b.rows() {
        return Err(NumericsError::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    let bs = b.as_slice();
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a.row(i).iter().enumerate().take(k) {
            if aip == 0.0 {
                continue;
            }
            let b_row = &bs[p * n..(p + 1) * n];
            for (o, &bpj) in out_row.iter_mut().zip(b_row) {
                *o += aip * bpj;
            }
        }
    }
    DenseMatrix::from_vec(m, n, out)
}

/// `M·v`.
pub fn matvec(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
    if m.cols() != v.len() {
        return Err(NumericsError::ShapeMismatch {
            op: "matvec",
            left: m.shape(),
            right: (v.len(), 1),
        });
    }
    Ok((0..m.rows())
        .map(|i| m.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect())
}

/// The `j`-th column of `m`.
pub fn column(m: &DenseMatrix, j: usize) -> Result<Vec<f64>, NumericsError> {
    m.column(j)
}

pub fn dot(u: &[f64], v: &[f64]) -> Result<f64, NumericsError> {
    if u.len() != v.len() {
        return Err(NumericsError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(dot_unchecked(u, v))
}

#[inline]
pub(crate) fn dot_unchecked(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot_unchecked(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn frobenius(m: &DenseMatrix) -> f64 {
    norm2(m.as_slice())
}

/// Entrywise `max(0, x)`.
pub fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(|x| x.max(0.0))
}

/// Euclidean norms of every column of `m`.
pub fn column_norms(m: &DenseMatrix) -> Vec<f64> {
    let mut sq = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, x) in sq.iter_mut().zip(m.row(i)) {
            *s += x * x;
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}
