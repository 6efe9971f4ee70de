//! Compresses one random layer with the 1-bit quantizer and compares the
//! resulting error to deterministic round-to-nearest.
//!
//! cargo run --example compress_layer

use spfc::analysis::{synthetic_data, DataDistribution};
use spfc::compressor::layer_errors;
use spfc::network::init_random_mlp;
use spfc::numerics::DenseMatrix;
use spfc::operators::rtn;
use spfc::{compress_layer, Activation, CompressionConfig, OperatorSpec};

fn main() {
    let (m, n0, n1, k) = (64, 256, 16, 1.0);
    let x = synthetic_data(m, n0, DataDistribution::Uniform, 3);
    let w = init_random_mlp(&[n0, n1], k, 4, Activation::Relu).unwrap().layer(0).clone();

    let cfg = CompressionConfig::new(9.0, OperatorSpec::onebit(k).unwrap(), 5).unwrap();
    let out = compress_layer(&w, &x, &x, &cfg, 0).unwrap();
    let (pre, post) = layer_errors(&x, &w, &x, &out.q, Activation::Relu).unwrap();

    let spec = OperatorSpec::rtn(k).unwrap();
    let q_rtn = DenseMatrix::from_fn(n0, n1, |i, j| rtn(w[(i, j)], &spec).unwrap());
    let (rtn_pre, rtn_post) = layer_errors(&x, &w, &x, &q_rtn, Activation::Relu).unwrap();

    println!("layer {n0}x{n1}, data {m}x{n0}, C = {}", cfg.scale);
    println!("stochastic 1-bit: max |XW-XQ| = {pre:.3}, after ReLU {post:.3}, {:.3}s", out.elapsed_secs);
    println!("round-to-nearest: max |XW-XQ| = {rtn_pre:.3}, after ReLU {rtn_post:.3}");
    println!("saturation events: {}", out.saturation_events());
    let max_u = out.final_u_inf().into_iter().fold(0.0_f64, f64::max);
    println!("largest final ||u||_inf over neurons: {max_u:.3}");
}
