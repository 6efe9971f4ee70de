//! Quantizes a three-layer network in paired mode, where each layer corrects
//! against the activations of the already-compressed layers, then saves it.
//!
//! cargo run --example compress_network [out_dir]

use spfc::analysis::{synthetic_data, DataDistribution};
use spfc::{compress_network, init_random_mlp, save_model, Activation, ActivationMode, CompressionConfig, OperatorSpec};

fn main() {
    let dims = [128, 64, 32, 10];
    let net = init_random_mlp(&dims, 1.0, 11, Activation::Relu).unwrap();
    let x = synthetic_data(200, dims[0], DataDistribution::Gaussian, 12);

    for mode in [ActivationMode::Shared, ActivationMode::Paired] {
        let cfg = CompressionConfig::new(8.0, OperatorSpec::quantize_prune(1.0, 0.5).unwrap(), 13)
            .unwrap()
            .with_mode(mode);
        let result = compress_network(&net, &x, &cfg).unwrap();
        println!("{mode:?} mode");
        for (i, l) in result.layers.iter().enumerate() {
            let q = &l.compression.q;
            let zeros = q.as_slice().iter().filter(|&&v| v == 0.0).count() as f64 / q.as_slice().len() as f64;
            println!(
                "  layer {i} {}x{}: max error {:.3} (pre-activation {:.3}), {:.0}% zeros",
                q.rows(),
                q.cols(),
                l.max_error_post,
                l.max_error_pre,
                100.0 * zeros
            );
        }
        if mode == ActivationMode::Paired {
            let dir = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("spfc-model").display().to_string());
            let path = std::path::Path::new(&dir).join("manifest.json");
            save_model(&result.compressed, &path).unwrap();
            println!("saved compressed model to {}", path.display());
        }
    }
}
