//! Bias-free multilayer perceptron: `Φ(X) = ρ(…ρ(ρ(X·W⁽¹⁾)·W⁽²⁾)…·W⁽ᴸ⁾)`.
//!
//! Rows of `X` are data points. Biases are handled by absorption: the data gains
//! a constant-1 column and each weight matrix gains a bias row (see
//! [`absorb_biases`]).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, mat1, DenseMatrix, NumericsError};
use crate::operators::RngStream;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("layer {layer}: {rows}x{cols} does not chain onto previous output dim {expected}")]
    BrokenChain {
        layer: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("input has {found} columns, network expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("dims must list at least two positive sizes, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("weight bound K must be finite and > 0, got {0}")]
    InvalidBound(f64),
    #[error("layer {layer}: |entry| = {value} violates the strict bound K = {k}")]
    BoundViolated { layer: usize, value: f64, k: f64 },
    #[error("layer {layer} contains a non-finite weight")]
    NonFinite { layer: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("layer file {path}: {source}")]
    LayerFile {
        path: PathBuf,
        #[source]
        source: NumericsError,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, m: &DenseMatrix) -> DenseMatrix {
        match self {
            Activation::Relu => numerics::relu(m),
            Activation::Identity => m.clone(),
        }
    }

    #[inline]
    pub fn apply_scalar(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseMatrix>,
    activation: Activation,
    k: f64,
}

impl MlpModel {
    pub fn new(layers: Vec<DenseMatrix>, activation: Activation, k: f64) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(NetworkError::InvalidBound(k));
        }
        for (i, w) in layers.iter().enumerate() {
            if !w.is_finite() {
                return Err(NetworkError::NonFinite { layer: i });
            }
            if i > 0 && layers[i - 1].cols() != w.rows() {
                return Err(NetworkError::BrokenChain {
                    layer: i,
                    rows: w.rows(),
                    cols: w.cols(),
                    expected: layers[i - 1].cols(),
                });
            }
        }
        Ok(Self { layers, activation, k })
    }

    pub fn layers(&self) -> &[DenseMatrix] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &DenseMatrix {
        &self.layers[i]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Declared weight bound `K`.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].cols()
    }

    /// `[N₀, N₁, …, N_L]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseMatrix::cols))
            .collect()
    }

    /// Checks `max |W_jk| < K` over all layers.
    pub fn check_strict_bound(&self) -> Result<(), NetworkError> {
        for (i, w) in self.layers.iter().enumerate() {
            let m = w.max_abs();
            if m >= self.k {
                return Err(NetworkError::BoundViolated {
                    layer: i,
                    value: m,
                    k: self.k,
                });
            }
        }
        Ok(())
    }

    /// Replaces layer `i` with a matrix of the same shape.
    pub fn set_layer(&mut self, i: usize, w: DenseMatrix) -> Result<(), NetworkError> {
        let old = &self.layers[i];
        if old.shape() != w.shape() {
            return Err(NetworkError::BrokenChain {
                layer: i,
                rows: w.rows(),
                cols: w.cols(),
                expected: old.rows(),
            });
        }
        self.layers[i] = w;
        Ok(())
    }
}

/// `X⁽⁰⁾ = X, X⁽¹⁾, …, X⁽ᴸ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStack(Vec<DenseMatrix>);

impl ActivationStack {
    pub fn get(&self, i: usize) -> &DenseMatrix {
        &self.0[i]
    }

    pub fn input(&self) -> &DenseMatrix {
        &self.0[0]
    }

    pub fn output(&self) -> &DenseMatrix {
        &self.0[self.0.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<DenseMatrix> {
        self.0
    }
}

pub fn forward(net: &MlpModel, x: &DenseMatrix) -> Result<ActivationStack, NetworkError> {
    if x.cols() != net.input_dim() {
        return Err(NetworkError::InputDim {
            expected: net.input_dim(),
            found: x.cols(),
        });
    }
    let mut stack = Vec::with_capacity(net.depth() + 1);
    stack.push(x.clone());
    for w in &net.layers {
        let pre = numerics::matmul(stack.last().unwrap(), w)?;
        stack.push(net.activation.apply(&pre));
    }
    Ok(ActivationStack(stack))
}

/// Random network with entries i.i.d. uniform on `(−K, K)`.
///
/// Layer `i` draws from `RngStream::derive(seed, i, 0)`.
pub fn init_random_mlp(dims: &[usize], k: f64, seed: u64, activation: Activation) -> Result<MlpModel, NetworkError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(NetworkError::BadDims(dims.to_vec()));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(NetworkError::InvalidBound(k));
    }
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, d)| {
            let mut rng = RngStream::derive(seed, i, 0);
            DenseMatrix::from_fn(d[0], d[1], |_, _| loop {
                let x = k * (2.0 * rng.next_f64() - 1.0);
                if x.abs() < k {
                    break x;
                }
            })
        })
        .collect();
    MlpModel::new(layers, activation, k)
}

/// Appends the constant-1 coordinate to every data row.
pub fn augment_input(x: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(x.rows(), x.cols() + 1, |i, j| if j < x.cols() { x[(i, j)] } else { 1.0 })
}

/// Folds per-layer biases into the weights.
///
/// Hidden layers gain a bias row and an extra output unit that carries the
/// constant 1 forward (valid because `ρ(1) = 1` for both activations). The last
/// layer only gains the bias row. Inputs must then go through
/// [`augment_input`].
pub fn absorb_biases(weights: &[DenseMatrix], biases: &[Vec<f64>]) -> Result<Vec<DenseMatrix>, NetworkError> {
    if weights.len() != biases.len() {
        return Err(NetworkError::Manifest(format!(
            "{} weight matrices but {} bias vectors",
            weights.len(),
            biases.len()
        )));
    }
    let last = weights.len().saturating_sub(1);
    let mut out = Vec::with_capacity(weights.len());
    for (i, (w, b)) in weights.iter().zip(biases).enumerate() {
        if b.len() != w.cols() {
            return Err(NetworkError::Manifest(format!(
                "layer {i}: bias length {} does not match {} output units",
                b.len(),
                w.cols()
            )));
        }
        let extra = usize::from(i != last);
        let (r, c) = (w.rows(), w.cols());
        out.push(DenseMatrix::from_fn(r + 1, c + extra, |row, col| match (row < r, col < c) {
            (true, true) => w[(row, col)],
            (false, true) => b[col],
            (true, false) => 0.0,
            (false, false) => 1.0,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub activation: Activation,
    #[serde(rename = "K")]
    pub k: f64,
    pub layers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biases: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict_bound: bool,
}

pub const MANIFEST_VERSION: u32 = 1;

/// Writes `manifest_path` plus one `layer{i}.mat1` per layer next to it.
pub fn save_model(net: &MlpModel, manifest_path: impl AsRef<Path>) -> Result<(), NetworkError> {
    let manifest_path = manifest_path.as_ref();
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let mut names = Vec::with_capacity(net.depth());
    for (i, w) in net.layers.iter().enumerate() {
        let name = format!("layer{i}.mat1");
        mat1::save(w, dir.join(&name))?;
        names.push(name);
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        activation: net.activation,
        k: net.k,
        layers: names,
        biases: None,
        strict_bound: false,
    };
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a manifest and its MAT1 layers. Paths are relative to the manifest.
///
/// If the manifest lists `biases` (one 1×N_i MAT1 file per layer) they are
/// absorbed, and the returned model expects inputs from [`augment_input`].
pub fn load_model(manifest_path: impl AsRef<Path>) -> Result<MlpModel, NetworkError> {
    let manifest_path = manifest_path.as_ref();
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(NetworkError::Manifest(format!(
            "unsupported version {}, expected {MANIFEST_VERSION}",
            manifest.version
        )));
    }
    if manifest.layers.is_empty() {
        return Err(NetworkError::NoLayers);
    }
    let load = |name: &String| {
        let path = dir.join(name);
        mat1::load(&path).map_err(|source| NetworkError::LayerFile { path, source })
    };
    let mut layers = manifest.layers.iter().map(load).collect::<Result<Vec<_>, _>>()?;
    if let Some(bias_files) = &manifest.biases {
        let biases = bias_files
            .iter()
            .map(|n| load(n).map(DenseMatrix::into_vec))
            .collect::<Result<Vec<_>, _>>()?;
        // Check the raw chain first so the error names the offending layer.
        MlpModel::new(layers.clone(), manifest.activation, manifest.k)?;
        layers = absorb_biases(&layers, &biases)?;
    }
    let net = MlpModel::new(layers, manifest.activation, manifest.k)?;
    if manifest.strict_bound {
        net.check_strict_bound()?;
    }
    Ok(net)
}
