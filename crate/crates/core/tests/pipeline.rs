//! Library-level compression of whole networks.

use spfc::analysis::{synthetic_data, DataDistribution};
use spfc::compressor::{compressed_activations, layer_errors};
use spfc::network::{absorb_biases, augment_input, forward, load_model, save_model, MlpModel};
use spfc::numerics::DenseMatrix;
use spfc::operators::{on_grid, on_offset_grid};
use spfc::{compress_network, init_random_mlp, Activation, ActivationMode, CompressionConfig, OperatorSpec};

#[test]
fn paired_network_quantization_end_to_end() {
    let net = init_random_mlp(&[48, 32, 16, 4], 1.0, 5, Activation::Relu).unwrap();
    let x = synthetic_data(40, 48, DataDistribution::Gaussian, 6);
    let cfg = CompressionConfig::new(8.0, OperatorSpec::onebit(1.0).unwrap(), 7)
        .unwrap()
        .with_mode(ActivationMode::Paired);
    let result = compress_network(&net, &x, &cfg).unwrap();
    assert_eq!(result.layers.len(), 3);
    assert_eq!(result.compressed.dims(), net.dims());
    for i in 0..3 {
        assert!(result.q(i).as_slice().iter().all(|&q| on_offset_grid(q, 1.0)));
    }

    // Reported errors agree with a fresh forward pass of both networks.
    let original = forward(&net, &x).unwrap();
    let compressed = compressed_activations(&result, &x).unwrap();
    for (i, layer) in result.layers.iter().enumerate() {
        let (pre, post) =
            layer_errors(original.get(i), net.layer(i), compressed.get(i), result.q(i), Activation::Relu).unwrap();
        assert_eq!(pre, layer.max_error_pre);
        assert_eq!(post, layer.max_error_post);
    }
}

#[test]
fn compressed_model_round_trips_through_files() {
    let net = init_random_mlp(&[20, 10, 5], 2.0, 1, Activation::Identity).unwrap();
    let x = synthetic_data(15, 20, DataDistribution::Uniform, 2);
    let cfg = CompressionConfig::new(4.0, OperatorSpec::quantize_prune(2.0, 0.5).unwrap(), 3).unwrap();
    let result = compress_network(&net, &x, &cfg).unwrap();
    for i in 0..2 {
        assert!(result.q(i).as_slice().iter().all(|&q| on_grid(q, 4.0)));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    save_model(&result.compressed, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, result.compressed);
    assert_eq!(forward(&back, &x).unwrap().output(), forward(&result.compressed, &x).unwrap().output());
}

#[test]
fn biased_network_compresses_on_augmented_input() {
    let w0 = DenseMatrix::from_fn(6, 4, |i, j| ((i + 2 * j) % 5) as f64 / 5.0 - 0.4);
    let w1 = DenseMatrix::from_fn(4, 2, |i, j| ((3 * i + j) % 4) as f64 / 4.0 - 0.3);
    let layers = absorb_biases(&[w0, w1], &[vec![0.1, -0.2, 0.3, 0.0], vec![0.05, -0.05]]).unwrap();
    let net = MlpModel::new(layers, Activation::Relu, 1.0).unwrap();
    let x = augment_input(&synthetic_data(12, 6, DataDistribution::Uniform, 8));
    let cfg = CompressionConfig::new(1.0, OperatorSpec::identity(1.0).unwrap(), 0).unwrap();
    let result = compress_network(&net, &x, &cfg).unwrap();
    assert!(result.layers.iter().all(|l| l.max_error_post == 0.0));
}

#[test]
fn seeds_control_every_draw() {
    let net = init_random_mlp(&[32, 8], 1.0, 9, Activation::Relu).unwrap();
    let x = synthetic_data(16, 32, DataDistribution::Uniform, 10);
    let run = |seed, threads| {
        let cfg = CompressionConfig::new(6.0, OperatorSpec::prune(1.0, 0.3).unwrap(), seed)
            .unwrap()
            .with_threads(threads);
        compress_network(&net, &x, &cfg).unwrap().q(0).clone()
    };
    assert_eq!(run(1, Some(1)), run(1, Some(4)));
    assert_eq!(run(1, None), run(1, Some(2)));
    assert_ne!(run(1, None), run(2, None));
}
