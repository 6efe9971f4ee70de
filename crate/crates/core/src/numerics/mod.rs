//! Dense `f64` linear algebra: the matrix type, products and norms, thin SVD,
//! largest-eigenvalue estimation and the MAT1 file format.

mod eigen;
pub mod mat1;
mod matrix;
mod ops;
mod svd;

pub use eigen::{max_eigenvalue, EIGEN_REL_TOL, SYMMETRY_TOL};
pub use matrix::DenseMatrix;
pub use ops::{column, column_norms, dot, frobenius, matmul, matvec, norm2, norm_inf, relu};
pub(crate) use ops::dot_unchecked;
pub use svd::{svd, SvdFactors, DEFAULT_RANK_TOL, ORTHOGONALITY_TOL};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("column index {index} out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric at ({row}, {col}): |difference| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("empty matrix")]
    Empty,
    #[error("{algorithm} did not converge, residual {residual:e}")]
    NoConvergence { algorithm: &'static str, residual: f64 },
    #[error("bad MAT1 magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated MAT1 payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("dimension {0} does not fit the MAT1 u32 header")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
