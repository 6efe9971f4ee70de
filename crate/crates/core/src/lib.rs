//! Post-training compression of multilayer perceptrons by stochastic path
//! following: each neuron is quantized or pruned one weight at a time while an
//! accumulated-error vector feeds corrections forward.
//!
//! Modules:
//! - [`numerics`]: dense matrices, SVD, eigenvalue bound, MAT1 files.
//! - [`operators`]: stochastic quantizer / pruner operators and RNG streams.
//! - [`compressor`]: the per-neuron recurrence, layer and network drivers.
//! - [`network`]: MLP model, forward pass, manifest persistence.
//! - [`analysis`]: error-bound calculators and Monte Carlo validators.
//! - [`cli`]: the `spfc` command-line front end and JSON/CSV reports.

pub mod analysis;
pub mod cli;
pub mod compressor;
pub mod network;
pub mod numerics;
pub mod operators;

pub use compressor::{
    compress_layer, compress_network, compress_neuron, ActivationMode, CompressError, CompressionConfig,
    CompressionResult, LayerCompression, NeuronTrace,
};
pub use network::{forward, init_random_mlp, load_model, save_model, Activation, MlpModel};
pub use numerics::DenseMatrix;
pub use operators::{OperatorKind, OperatorSpec, RngStream, StochasticOperator};
