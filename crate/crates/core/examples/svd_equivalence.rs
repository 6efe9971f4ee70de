//! Compressing against tall data X or against its reduced form ΣVᵀ gives the
//! same weights when both runs share a random stream.
//!
//! cargo run --example svd_equivalence

use spfc::analysis::{svd_equivalence_experiment, synthetic_data, DataDistribution};
use spfc::{CompressionConfig, OperatorSpec};

fn main() {
    let x = synthetic_data(500, 12, DataDistribution::Gaussian, 1);
    let w: Vec<f64> = (0..12).map(|i| ((i * 37) % 19) as f64 / 10.0 - 0.95).collect();
    let cfg = CompressionConfig::new(4.0, OperatorSpec::onebit(1.0).unwrap(), 2).unwrap();
    let r = svd_equivalence_experiment(&x, &w, &cfg).unwrap();
    println!("X is 500x12, reduced form is {}x12", r.rank);
    println!("q from X:      {:?}", r.q_x);
    println!("q from SigmaVt: {:?}", r.q_svt);
    println!("||X(w-q)|| = {:.12}, ||SigmaVt(w-q)|| = {:.12}, relative gap {:.1e}", r.norm_x, r.norm_svt, r.relative_norm_diff);
    println!("equivalent: {}", r.pass);
}
