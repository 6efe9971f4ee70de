//! Dense matrix toolkit: products, thin SVD, largest eigenvalue and the MAT1
//! binary format.
//!
//! cargo run --example dense_numerics

use spfc::numerics::{frobenius, mat1, matmul, max_eigenvalue, svd, DenseMatrix, DEFAULT_RANK_TOL};

fn main() {
    let a = DenseMatrix::from_fn(6, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
    let f = svd(&a, DEFAULT_RANK_TOL).unwrap();
    println!("singular values: {:?}", f.singular_values);
    let err = frobenius(&f.reconstruct().sub(&a).unwrap());
    println!("reconstruction error: {err:.2e}");

    let gram = matmul(&a.transpose(), &a).unwrap();
    let lam = max_eigenvalue(&gram).unwrap();
    println!("lambda_max(AtA) = {lam:.10}, sigma_max^2 = {:.10}", f.singular_values[0].powi(2));

    let bytes = mat1::encode(&a).unwrap();
    println!("MAT1 encoding: {} bytes (12 header + 8 per entry), magic {:?}", bytes.len(), std::str::from_utf8(&bytes[..4]).unwrap());
    assert_eq!(mat1::decode(&bytes).unwrap(), a);
}
