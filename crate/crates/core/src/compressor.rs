//! Stochastic path-following compression.
//!
//! Each neuron `w` is compressed entry by entry while carrying the accumulated
//! error `u_t = Σ_{j≤t} w_j X_j − q_j X̃_j`:
//!
//! ```text
//! h_t = C·w_t·X_t + u_{t−1}
//! v_t = ⟨h_t, X̃_t⟩ / (C‖X̃_t‖²)
//! q_t = T(v_t)
//! u_t = u_{t−1} + w_t·X_t − q_t·X̃_t
//! ```
//!
//! `v_t` is evaluated as `w_t·⟨X_t, X̃_t⟩/‖X̃_t‖² + ⟨u_{t−1}, X̃_t⟩/(C‖X̃_t‖²)`,
//! which is the same quantity but makes the shared-activation case exact: with
//! `X̃ = X` the first ratio is exactly `1.0`.
//!
//! Neurons are independent. Neuron `j` of layer `i` always draws from
//! `RngStream::derive(master_seed, i, j)`, so serial and parallel runs agree
//! bitwise.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{self, forward, Activation, MlpModel, NetworkError};
use crate::numerics::{self, dot_unchecked, norm_inf, DenseMatrix, NumericsError};
use crate::operators::{OperatorError, OperatorSpec, RngStream, StochasticOperator};

pub const DEFAULT_ZERO_COLUMN_TOL: f64 = 1e-24;

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("scaling constant C must be finite and >= 1, got {0}")]
    InvalidScale(f64),
    #[error("zero-column tolerance must be finite and >= 0, got {0}")]
    InvalidTolerance(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value at step {step} ({what})")]
    NonFinite { step: usize, what: &'static str },
    #[error("operator failed at step {step}: {source}")]
    Operator {
        step: usize,
        #[source]
        source: OperatorError,
    },
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which activations drive the error correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    /// `X` from the original network, `X̃` from the compressed-so-far network.
    Paired,
    /// `X̃ = X`.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionConfig {
    /// Error-correction scaling `C ≥ 1`.
    #[serde(rename = "C")]
    pub scale: f64,
    pub operator: OperatorSpec,
    pub master_seed: u64,
    pub activation_mode: ActivationMode,
    pub zero_column_tol: f64,
    /// Keep the full `u_t` history per neuron (m·N floats each).
    #[serde(default)]
    pub retain_traces: bool,
    /// Worker threads for column fan-out; `None` uses the global pool.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

impl CompressionConfig {
    pub fn new(scale: f64, operator: OperatorSpec, master_seed: u64) -> Result<Self, CompressError> {
        let cfg = Self {
            scale,
            operator,
            master_seed,
            activation_mode: ActivationMode::Shared,
            zero_column_tol: DEFAULT_ZERO_COLUMN_TOL,
            retain_traces: false,
            threads: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: ActivationMode) -> Self {
        self.activation_mode = mode;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_traces(mut self, retain: bool) -> Self {
        self.retain_traces = retain;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), CompressError> {
        if !(self.scale.is_finite() && self.scale >= 1.0) {
            return Err(CompressError::InvalidScale(self.scale));
        }
        if !(self.zero_column_tol.is_finite() && self.zero_column_tol >= 0.0) {
            return Err(CompressError::InvalidTolerance(self.zero_column_tol));
        }
        Ok(())
    }
}

/// Per-neuron record of one compression run.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronTrace {
    /// Compressed weights `q_t`.
    pub q: Vec<f64>,
    /// `‖u_t‖_∞` after each step.
    pub u_norm_inf: Vec<f64>,
    /// Operator arguments `v_t`.
    pub v: Vec<f64>,
    /// Steps where the correction `|v_t − w_t|` exceeded `K`.
    pub saturation_events: usize,
    /// Steps that hit the zero-column fallback `v_t = w_t`.
    pub zero_column_steps: usize,
    /// Whether `‖w‖_∞ ≥ K` (outside the theory's hypothesis).
    pub weight_bound_exceeded: bool,
    /// Final accumulated error `u_N`.
    pub u_final: Vec<f64>,
    /// `u_1, …, u_N` when traces are retained.
    pub u_history: Option<Vec<Vec<f64>>>,
    /// Random words consumed from the neuron's stream.
    pub rng_draws: u64,
}

/// Column views of `X` and `X̃` plus the per-step scalars that depend only on data.
pub struct LayerData {
    x: Vec<Vec<f64>>,
    xt: Option<Vec<Vec<f64>>>,
    /// `⟨X_t, X̃_t⟩ / ‖X̃_t‖²`
    weight_ratio: Vec<f64>,
    /// `‖X̃_t‖²`
    xt_sq: Vec<f64>,
}

impl LayerData {
    /// `xt = None` means `X̃ = X`.
    pub fn new(x: &DenseMatrix, xt: Option<&DenseMatrix>) -> Result<Self, CompressError> {
        if let Some(xt) = xt {
            if xt.shape() != x.shape() {
                return Err(CompressError::Dimension(format!(
                    "X is {}x{} but X~ is {}x{}",
                    x.rows(),
                    x.cols(),
                    xt.rows(),
                    xt.cols()
                )));
            }
        }
        let x_cols = x.columns();
        let xt_cols = xt.map(DenseMatrix::columns);
        let n = x_cols.len();
        let mut weight_ratio = Vec::with_capacity(n);
        let mut xt_sq = Vec::with_capacity(n);
        for t in 0..n {
            let xc = &x_cols[t];
            let xtc = xt_cols.as_ref().map_or(xc, |c| &c[t]);
            let sq = dot_unchecked(xtc, xtc);
            weight_ratio.push(dot_unchecked(xc, xtc) / sq);
            xt_sq.push(sq);
        }
        Ok(Self {
            x: x_cols,
            xt: xt_cols,
            weight_ratio,
            xt_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    fn xt_col(&self, t: usize) -> &[f64] {
        self.xt.as_ref().map_or(&self.x[t], |c| &c[t])
    }
}

/// Scalars of the recurrence that do not depend on the operator.
#[derive(Debug, Clone, Copy)]
pub struct NeuronParams {
    pub scale: f64,
    pub k: f64,
    pub zero_column_tol: f64,
    pub retain_traces: bool,
}

impl From<&CompressionConfig> for NeuronParams {
    fn from(cfg: &CompressionConfig) -> Self {
        Self {
            scale: cfg.scale,
            k: cfg.operator.k(),
            zero_column_tol: cfg.zero_column_tol,
            retain_traces: cfg.retain_traces,
        }
    }
}

/// Runs the recurrence for one neuron with an arbitrary operator.
pub fn compress_neuron_with<T: StochasticOperator + ?Sized>(
    w: &[f64],
    data: &LayerData,
    params: NeuronParams,
    op: &T,
    rng: &mut RngStream,
) -> Result<NeuronTrace, CompressError> {
    let n = data.len();
    if w.len() != n {
        return Err(CompressError::Dimension(format!(
            "neuron has {} weights but data has {} columns",
            w.len(),
            n
        )));
    }
    let m = data.rows();
    let start = rng.position();
    let mut u = vec![0.0; m];
    let mut trace = NeuronTrace {
        q: Vec::with_capacity(n),
        u_norm_inf: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        saturation_events: 0,
        zero_column_steps: 0,
        weight_bound_exceeded: w.iter().any(|x| x.abs() >= params.k),
        u_final: Vec::new(),
        u_history: params.retain_traces.then(|| Vec::with_capacity(n)),
        rng_draws: 0,
    };

    for t in 0..n {
        let wt = w[t];
        let x = &data.x[t];
        let xt = data.xt_col(t);
        let sq = data.xt_sq[t];

        let v = if sq <= params.zero_column_tol {
            trace.zero_column_steps += 1;
            wt
        } else {
            wt * data.weight_ratio[t] + dot_unchecked(&u, xt) / (params.scale * sq)
        };
        if !v.is_finite() {
            return Err(CompressError::NonFinite { step: t, what: "v_t" });
        }
        let q = op
            .apply(v, rng)
            .map_err(|source| CompressError::Operator { step: t, source })?;
        if !q.is_finite() {
            return Err(CompressError::NonFinite { step: t, what: "q_t" });
        }
        if (v - wt).abs() > params.k {
            trace.saturation_events += 1;
        }

        for ((ui, &xi), &xti) in u.iter_mut().zip(x).zip(xt) {
            *ui += wt * xi - q * xti;
        }
        let u_inf = norm_inf(&u);
        if !u_inf.is_finite() {
            return Err(CompressError::NonFinite { step: t, what: "u_t" });
        }

        trace.q.push(q);
        trace.v.push(v);
        trace.u_norm_inf.push(u_inf);
        if let Some(h) = trace.u_history.as_mut() {
            h.push(u.clone());
        }
    }
    trace.u_final = u;
    trace.rng_draws = rng.position() - start;
    Ok(trace)
}

/// Compresses a single neuron `w` against data `X` and compressed-network
/// activations `X̃` (pass the same matrix twice for shared mode).
pub fn compress_neuron(
    w: &[f64],
    x: &DenseMatrix,
    xt: &DenseMatrix,
    cfg: &CompressionConfig,
    rng: &mut RngStream,
) -> Result<NeuronTrace, CompressError> {
    cfg.validate()?;
    let data = if std::ptr::eq(x, xt) || x == xt {
        LayerData::new(x, None)?
    } else {
        LayerData::new(x, Some(xt))?
    };
    compress_neuron_with(w, &data, NeuronParams::from(cfg), &cfg.operator, rng)
}

/// Result of compressing one weight matrix.
#[derive(Debug, Clone)]
pub struct LayerCompression {
    pub layer: usize,
    /// Compressed weights, same shape as `W`.
    pub q: DenseMatrix,
    pub traces: Vec<NeuronTrace>,
    pub elapsed_secs: f64,
}

impl LayerCompression {
    pub fn saturation_events(&self) -> usize {
        self.traces.iter().map(|t| t.saturation_events).sum()
    }

    pub fn final_u_inf(&self) -> Vec<f64> {
        self.traces
            .iter()
            .map(|t| t.u_norm_inf.last().copied().unwrap_or(0.0))
            .collect()
    }

    pub fn weight_bound_exceeded(&self) -> bool {
        self.traces.iter().any(|t| t.weight_bound_exceeded)
    }
}

pub(crate) fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CompressError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CompressError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Compresses every column of `W` with the given operator.
pub fn compress_layer_with<T: StochasticOperator + Sync + ?Sized>(
    w: &DenseMatrix,
    data: &LayerData,
    params: NeuronParams,
    op: &T,
    master_seed: u64,
    layer: usize,
    threads: Option<usize>,
) -> Result<LayerCompression, CompressError> {
    if w.rows() != data.len() {
        return Err(CompressError::Dimension(format!(
            "W has {} rows but data has {} columns",
            w.rows(),
            data.len()
        )));
    }
    let started = Instant::now();
    let columns = w.columns();
    let traces: Vec<NeuronTrace> = with_pool(threads, || {
        columns
            .par_iter()
            .enumerate()
            .map(|(j, col)| {
                let mut rng = RngStream::derive(master_seed, layer, j);
                compress_neuron_with(col, data, params, op, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()
    })??;

    let mut q = DenseMatrix::zeros(w.rows(), w.cols());
    for (j, t) in traces.iter().enumerate() {
        q.set_column(j, &t.q);
    }
    let out = LayerCompression {
        layer,
        q,
        traces,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    if out.weight_bound_exceeded() {
        log::warn!(
            "layer {layer}: weights reach |w| >= K = {}; error bounds assume a strict bound",
            params.k
        );
    }
    Ok(out)
}

/// Compresses `W` (N_{i−1} × N_i) given `X` and `X̃` (m × N_{i−1}).
pub fn compress_layer(
    w: &DenseMatrix,
    x: &DenseMatrix,
    xt: &DenseMatrix,
    cfg: &CompressionConfig,
    layer: usize,
) -> Result<LayerCompression, CompressError> {
    cfg.validate()?;
    if x.cols() != w.rows() || xt.cols() != w.rows() || x.rows() != xt.rows() {
        return Err(CompressError::Dimension(format!(
            "W is {}x{}, X is {}x{}, X~ is {}x{}",
            w.rows(),
            w.cols(),
            x.rows(),
            x.cols(),
            xt.rows(),
            xt.cols()
        )));
    }
    let shared = cfg.activation_mode == ActivationMode::Shared || std::ptr::eq(x, xt) || x == xt;
    let data = LayerData::new(x, (!shared).then_some(xt))?;
    compress_layer_with(
        w,
        &data,
        NeuronParams::from(cfg),
        &cfg.operator,
        cfg.master_seed,
        layer,
        cfg.threads,
    )
}

/// Per-layer outcome inside a network run.
#[derive(Debug, Clone)]
pub struct NetworkLayerResult {
    pub compression: LayerCompression,
    /// `max |X⁽ⁱ⁻¹⁾W − X̃⁽ⁱ⁻¹⁾Q|`
    pub max_error_pre: f64,
    /// `max |ρ(X⁽ⁱ⁻¹⁾W) − ρ(X̃⁽ⁱ⁻¹⁾Q)|`
    pub max_error_post: f64,
    /// `‖X⁽ⁱ⁻¹⁾_t‖` for the columns this layer consumed.
    pub input_column_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CompressionResult {
    pub layers: Vec<NetworkLayerResult>,
    pub compressed: MlpModel,
}

impl CompressionResult {
    pub fn q(&self, layer: usize) -> &DenseMatrix {
        &self.layers[layer].compression.q
    }
}

/// Pre- and post-activation max-abs errors between `X·W` and `X̃·Q`.
pub fn layer_errors(
    x: &DenseMatrix,
    w: &DenseMatrix,
    xt: &DenseMatrix,
    q: &DenseMatrix,
    activation: Activation,
) -> Result<(f64, f64), CompressError> {
    let a = numerics::matmul(x, w)?;
    let b = numerics::matmul(xt, q)?;
    let mut pre = 0.0_f64;
    let mut post = 0.0_f64;
    for (&p, &r) in a.as_slice().iter().zip(b.as_slice()) {
        pre = pre.max((p - r).abs());
        post = post.max((activation.apply_scalar(p) - activation.apply_scalar(r)).abs());
    }
    Ok((pre, post))
}

/// Compresses a whole network layer by layer.
///
/// Original activations are computed once; compressed activations are
/// propagated incrementally as each `Q⁽ⁱ⁾` is installed.
pub fn compress_network(net: &MlpModel, x: &DenseMatrix, cfg: &CompressionConfig) -> Result<CompressionResult, CompressError> {
    cfg.validate()?;
    let original = forward(net, x)?;
    let mut compressed = net.clone();
    let mut xt = x.clone();
    let mut layers = Vec::with_capacity(net.depth());
    for i in 0..net.depth() {
        let xi = original.get(i);
        let w = net.layer(i);
        let xt_i = match cfg.activation_mode {
            ActivationMode::Shared => xi,
            ActivationMode::Paired => &xt,
        };
        let comp = compress_layer(w, xi, xt_i, cfg, i)?;
        let (max_error_pre, max_error_post) = layer_errors(xi, w, xt_i, &comp.q, net.activation())?;
        compressed.set_layer(i, comp.q.clone())?;
        if cfg.activation_mode == ActivationMode::Paired {
            xt = net.activation().apply(&numerics::matmul(&xt, &comp.q)?);
        }
        layers.push(NetworkLayerResult {
            input_column_norms: numerics::column_norms(xi),
            compression: comp,
            max_error_pre,
            max_error_post,
        });
    }
    Ok(CompressionResult { layers, compressed })
}

/// Compressed activations `X̃⁽ⁱ⁾` for every layer of `result.compressed`.
pub fn compressed_activations(result: &CompressionResult, x: &DenseMatrix) -> Result<network::ActivationStack, CompressError> {
    Ok(forward(&result.compressed, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_random_mlp;
    use crate::numerics::{matvec, norm2};

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::derive(seed, 99, 0);
        DenseMatrix::from_fn(rows, cols, |_, _| 2.0 * rng.next_f64() - 1.0)
    }

    fn random_weights(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::derive(seed, 98, 0);
        (0..n).map(|_| 0.99 * (2.0 * rng.next_f64() - 1.0)).collect()
    }

    #[test]
    fn identity_shared_is_a_zero_error_fixed_point() {
        let x = random(6, 10, 1);
        let w = random_weights(10, 2);
        for c in [1.0, 3.0, 100.0] {
            let cfg = CompressionConfig::new(c, OperatorSpec::identity(1.0).unwrap(), 0).unwrap();
            let tr = compress_neuron(&w, &x, &x, &cfg, &mut RngStream::derive(0, 0, 0)).unwrap();
            assert_eq!(tr.q, w);
            assert!(tr.u_norm_inf.iter().all(|&u| u == 0.0));
        }
    }

    #[test]
    fn single_step_algebra() {
        let x = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        for c in [1.0, 5.0] {
            let cfg = CompressionConfig::new(c, OperatorSpec::onebit(1.0).unwrap(), 0).unwrap();
            let mut rng = RngStream::derive(3, 0, 0);
            let tr = compress_neuron(&[0.4], &x, &x, &cfg, &mut rng).unwrap();
            assert_eq!(tr.v, vec![0.4]);
            assert!((tr.u_final[0] - (0.4 - tr.q[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn recorded_q_replays_to_recorded_u() {
        let x = random(4, 8, 5);
        let w = random_weights(8, 6);
        let cfg = CompressionConfig::new(2.0, OperatorSpec::onebit(1.0).unwrap(), 0).unwrap();
        let tr = compress_neuron(&w, &x, &x, &cfg, &mut RngStream::derive(7, 0, 0)).unwrap();
        let mut u = vec![0.0; 4];
        for t in 0..8 {
            let col = x.column(t).unwrap();
            for i in 0..4 {
                u[i] += w[t] * col[i] - tr.q[t] * col[i];
            }
            assert!((norm_inf(&u) - tr.u_norm_inf[t]).abs() <= 1e-12);
        }
    }

    #[test]
    fn recurrence_decomposition_holds_each_step() {
        let x = random(5, 30, 8);
        let w = random_weights(30, 9);
        let c = 3.0;
        let cfg = CompressionConfig::new(c, OperatorSpec::onebit(1.0).unwrap(), 0)
            .unwrap()
            .with_traces(true);
        let tr = compress_neuron(&w, &x, &x, &cfg, &mut RngStream::derive(1, 0, 0)).unwrap();
        let hist = tr.u_history.as_ref().unwrap();
        let mut prev = vec![0.0; 5];
        for t in 0..30 {
            let xt = x.column(t).unwrap();
            let sq = dot_unchecked(&xt, &xt);
            let proj = dot_unchecked(&prev, &xt) / sq;
            let resid: Vec<f64> = (0..5)
                .map(|i| hist[t][i] - (prev[i] - proj * xt[i] / c) - (tr.v[t] - tr.q[t]) * xt[i])
                .collect();
            assert!(norm2(&resid) <= 1e-10 * norm2(&hist[t]).max(1.0));
            prev = hist[t].clone();
        }
    }

    #[test]
    fn final_error_is_xw_minus_xq() {
        let x = random(7, 20, 10);
        let w = random_weights(20, 11);
        let cfg = CompressionConfig::new(4.0, OperatorSpec::quantize_prune(1.0, 0.5).unwrap(), 0).unwrap();
        let tr = compress_neuron(&w, &x, &x, &cfg, &mut RngStream::derive(2, 0, 0)).unwrap();
        let xw = matvec(&x, &w).unwrap();
        let xq = matvec(&x, &tr.q).unwrap();
        let diff: Vec<f64> = xw.iter().zip(&xq).map(|(a, b)| a - b).collect();
        let err: Vec<f64> = diff.iter().zip(&tr.u_final).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-10 * norm2(&diff).max(1.0));
        assert!(tr.q.iter().all(|&q| crate::operators::on_grid(q, 2.0)));
    }

    #[test]
    fn zero_column_falls_back_to_raw_weight() {
        let mut x = random(3, 4, 12);
        for i in 0..3 {
            x[(i, 2)] = 0.0;
        }
        let w = [0.5, -0.5, 0.25, 0.1];
        let cfg = CompressionConfig::new(2.0, OperatorSpec::identity(1.0).unwrap(), 0).unwrap();
        let tr = compress_neuron(&w, &x, &x, &cfg, &mut RngStream::derive(0, 0, 0)).unwrap();
        assert_eq!(tr.zero_column_steps, 1);
        assert_eq!(tr.v[2], 0.25);
    }

    #[test]
    fn weight_bound_violation_is_flagged_not_fatal() {
        let x = random(3, 3, 13);
        let cfg = CompressionConfig::new(2.0, OperatorSpec::onebit(1.0).unwrap(), 0).unwrap();
        let tr = compress_neuron(&[1.5, 0.0, 0.0], &x, &x, &cfg, &mut RngStream::derive(0, 0, 0)).unwrap();
        assert!(tr.weight_bound_exceeded);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(matches!(
            CompressionConfig::new(0.5, OperatorSpec::onebit(1.0).unwrap(), 0),
            Err(CompressError::InvalidScale(_))
        ));
        let x = random(3, 3, 0);
        let cfg = CompressionConfig::new(1.0, OperatorSpec::onebit(1.0).unwrap(), 0).unwrap();
        assert!(matches!(
            compress_layer(&DenseMatrix::zeros(4, 2), &x, &x, &cfg, 0),
            Err(CompressError::Dimension(_))
        ));
    }

    #[test]
    fn single_column_layer_matches_neuron() {
        let x = random(5, 6, 14);
        let w = DenseMatrix::from_vec(6, 1, random_weights(6, 15)).unwrap();
        let cfg = CompressionConfig::new(2.0, OperatorSpec::onebit(1.0).unwrap(), 77).unwrap();
        let layer = compress_layer(&w, &x, &x, &cfg, 3).unwrap();
        let tr = compress_neuron(w.as_slice(), &x, &x, &cfg, &mut RngStream::derive(77, 3, 0)).unwrap();
        assert_eq!(layer.q.as_slice(), tr.q.as_slice());
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let x = random(8, 12, 16);
        let w = random(12, 16, 17).scale(0.99);
        let cfg = CompressionConfig::new(3.0, OperatorSpec::onebit(1.0).unwrap(), 5).unwrap();
        let serial = compress_layer(&w, &x, &x, &cfg.clone().with_threads(Some(1)), 0).unwrap();
        let parallel = compress_layer(&w, &x, &x, &cfg.with_threads(Some(4)), 0).unwrap();
        assert!(serial
            .q
            .as_slice()
            .iter()
            .zip(parallel.q.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn identity_network_reproduces_activations() {
        let net = init_random_mlp(&[6, 5, 4], 1.0, 1, Activation::Relu).unwrap();
        let x = random(10, 6, 18);
        for mode in [ActivationMode::Shared, ActivationMode::Paired] {
            let cfg = CompressionConfig::new(2.0, OperatorSpec::identity(1.0).unwrap(), 0)
                .unwrap()
                .with_mode(mode);
            let res = compress_network(&net, &x, &cfg).unwrap();
            assert_eq!(res.compressed, net);
            assert_eq!(forward(&res.compressed, &x).unwrap(), forward(&net, &x).unwrap());
            assert!(res.layers.iter().all(|l| l.max_error_post == 0.0));
        }
    }

    #[test]
    fn single_layer_network_equals_layer_compression() {
        let net = init_random_mlp(&[8, 3], 1.0, 2, Activation::Relu).unwrap();
        let x = random(5, 8, 19);
        let cfg = CompressionConfig::new(2.0, OperatorSpec::onebit(1.0).unwrap(), 4)
            .unwrap()
            .with_mode(ActivationMode::Paired);
        let res = compress_network(&net, &x, &cfg).unwrap();
        let layer = compress_layer(net.layer(0), &x, &x, &cfg, 0).unwrap();
        assert_eq!(res.q(0), &layer.q);
    }

    #[test]
    fn paired_mode_diverges_from_shared_in_deeper_layers() {
        let net = init_random_mlp(&[8, 6, 4], 1.0, 3, Activation::Relu).unwrap();
        let x = random(12, 8, 20);
        let base = CompressionConfig::new(2.0, OperatorSpec::onebit(1.0).unwrap(), 9).unwrap();
        let paired = compress_network(&net, &x, &base.clone().with_mode(ActivationMode::Paired)).unwrap();
        let shared = compress_network(&net, &x, &base.with_mode(ActivationMode::Shared)).unwrap();
        assert_eq!(paired.q(0), shared.q(0));
        let x1 = forward(&net, &x).unwrap().get(1).clone();
        let xt1 = compressed_activations(&paired, &x).unwrap().get(1).clone();
        assert_ne!(x1, xt1);
        assert_ne!(paired.layers[1].compression.traces, shared.layers[1].compression.traces);
    }
}
