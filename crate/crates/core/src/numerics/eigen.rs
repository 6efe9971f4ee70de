use super::ops::{dot_unchecked, norm2};
use super::{matvec, DenseMatrix, NumericsError};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const EIGEN_REL_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

/// Largest eigenvalue of a symmetric matrix by power iteration on the Rayleigh
/// quotient.
///
/// The input is symmetrized as `(S + Sᵀ)/2` first. If the dominant eigenvalue
/// (in magnitude) is negative, a second pass runs on the PSD shift `S − λI`.
pub fn max_eigenvalue(s: &DenseMatrix) -> Result<f64, NumericsError> {
    if s.rows() != s.cols() {
        return Err(NumericsError::ShapeMismatch {
            op: "max_eigenvalue",
            left: s.shape(),
            right: s.shape(),
        });
    }
    let n = s.rows();
    if n == 0 {
        return Err(NumericsError::Empty);
    }
    let scale = s.max_abs().max(1.0);
    let mut sym = s.clone();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (s[(i, j)], s[(j, i)]);
            if (a - b).abs() > SYMMETRY_TOL * scale {
                return Err(NumericsError::NotSymmetric {
                    row: i,
                    col: j,
                    diff: (a - b).abs(),
                });
            }
            let avg = 0.5 * (a + b);
            sym[(i, j)] = avg;
            sym[(j, i)] = avg;
        }
    }
    if sym.max_abs() == 0.0 {
        return Ok(0.0);
    }

    let dominant = power_iteration(&sym)?;
    if dominant >= 0.0 {
        return Ok(dominant);
    }
    let mut shifted = sym;
    for i in 0..n {
        shifted[(i, i)] -= dominant;
    }
    Ok(power_iteration(&shifted)? + dominant)
}

fn power_iteration(s: &DenseMatrix) -> Result<f64, NumericsError> {
    let n = s.rows();
    // Fixed, non-degenerate start vector.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.618_033_988_749_894_9 * ((i as f64 + 1.0) * 0.754_877_666).fract())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = f64::NAN;
    for _ in 0..MAX_ITERS {
        let w = matvec(s, &v)?;
        let rq = dot_unchecked(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        // Rayleigh residual ‖Sv − λv‖ small relative to ‖Sv‖; the quotient's
        // own error is then second order in the residual.
        let res: f64 = w.iter().zip(&v).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        let converged = res <= EIGEN_REL_TOL * nw;
        lambda = rq;
        if converged {
            return Ok(lambda);
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    // Clustered top eigenvalues converge slowly in the vector but the
    // Rayleigh quotient is already accurate to second order.
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matmul;
    use crate::operators::RngStream;

    #[test]
    fn diagonal() {
        assert!((max_eigenvalue(&DenseMatrix::from_diagonal(&[2.0, 5.0])).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(max_eigenvalue(&DenseMatrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn negative_definite_picks_least_negative() {
        let m = DenseMatrix::from_diagonal(&[-5.0, -1.0, -3.0]);
        assert!((max_eigenvalue(&m).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(max_eigenvalue(&m), Err(NumericsError::NotSymmetric { .. })));
    }

    #[test]
    fn psd_matches_nalgebra_oracle() {
        let mut rng = RngStream::derive(42, 0, 0);
        for n in 2..=8 {
            let a = DenseMatrix::from_fn(n, n, |_, _| rng.next_f64() - 0.5);
            let s = matmul(&a.transpose(), &a).unwrap();
            let oracle = nalgebra::DMatrix::from_row_slice(n, n, s.as_slice())
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let got = max_eigenvalue(&s).unwrap();
            assert!((got - oracle).abs() <= 1e-8 * oracle.abs().max(1.0), "{got} vs {oracle}");
        }
    }
}
