//! `spfc` command-line front end.
//!
//! Exit codes: `0` success, `1` a bound or equivalence check failed beyond
//! its statistical slack, `2` bad input (message names the field).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, failure_mass, kappa, rtn_comparison, rtn_table_csv, svd_equivalence_experiment, synthetic_data,
    theorem_trials, verify_proposition, verify_theorem, BoundInputs, BoundReport, DataDistribution,
    PropositionSetup, RtnRow, RtnSetup, SvdEquivalence, TheoremReport, Verdict,
};
use crate::compressor::{compress_network, ActivationMode, CompressionConfig, CompressionResult};
use crate::network::{augment_input, init_random_mlp, load_model, save_model, Activation, MlpModel};
use crate::numerics::{mat1, DenseMatrix};
use crate::operators::{mix_seed, OperatorKind, OperatorSpec, RngStream};

/// Version of the report JSON layout.
pub const REPORT_VERSION: u32 = 1;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "SPFC_SEED";

#[derive(Debug, Parser)]
#[command(name = "spfc", version, about = "Stochastic path-following compression of MLP layers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Quantize a network to the 1-bit alphabet {±2K, ±6K, …}.
    Quantize(RunArgs),
    /// Stochastically prune a network.
    Prune(RunArgs),
    /// Prune, then quantize onto 2K·ℤ.
    QuantizePrune(RunArgs),
    /// Monte Carlo check of the single-layer error bounds.
    VerifyBounds(RunArgs),
    /// Round-to-nearest versus stochastic 1-bit on a coherent instance.
    CompareRtn(RunArgs),
    /// Check that compressing against X and against ΣVᵀ agree.
    SvdCheck(RunArgs),
}

impl CommandArgs {
    fn split(self) -> (Command, RunArgs) {
        match self {
            CommandArgs::Quantize(a) => (Command::Quantize, a),
            CommandArgs::Prune(a) => (Command::Prune, a),
            CommandArgs::QuantizePrune(a) => (Command::QuantizePrune, a),
            CommandArgs::VerifyBounds(a) => (Command::VerifyBounds, a),
            CommandArgs::CompareRtn(a) => (Command::CompareRtn, a),
            CommandArgs::SvdCheck(a) => (Command::SvdCheck, a),
        }
    }
}

/// Flags shared by every subcommand. Any of them may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Layer widths of a synthetic network, e.g. 64,16. For compare-rtn: the N0 list.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Model manifest JSON (alternative to --dims).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// MAT1 data matrix (m × N0); synthetic data is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of synthetic data points.
    #[arg(long)]
    pub m: Option<usize>,
    /// Synthetic data distribution: uniform or gaussian.
    #[arg(long)]
    pub distribution: Option<String>,
    /// Error-correction scaling constant C >= 1.
    #[arg(long = "C")]
    pub scale: Option<f64>,
    /// Weight bound K > 0.
    #[arg(long = "K")]
    pub k: Option<f64>,
    /// Pruning threshold fraction c in (0, 1].
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Failure-probability exponent p >= 1.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// paired or shared.
    #[arg(long)]
    pub activation_mode: Option<String>,
    /// relu or identity (synthetic networks only).
    #[arg(long)]
    pub activation: Option<String>,
    /// Operator kind where the subcommand allows a choice.
    #[arg(long)]
    pub kind: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV table path (compare-rtn).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the compressed model manifest here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    /// Worker threads; machine parallelism when absent.
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON file with any of the above fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// The `--config` file: same fields as the flags, all optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dims: Option<Vec<usize>>,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub m: Option<usize>,
    pub distribution: Option<String>,
    #[serde(rename = "C")]
    pub scale: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub activation_mode: Option<String>,
    pub activation: Option<String>,
    pub kind: Option<String>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub save_model: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunArgs {
    /// Flags win over the config file.
    fn merge(self, file: ConfigFile) -> RunArgs {
        RunArgs {
            dims: self.dims.or(file.dims),
            model: self.model.or(file.model),
            data: self.data.or(file.data),
            m: self.m.or(file.m),
            distribution: self.distribution.or(file.distribution),
            scale: self.scale.or(file.scale),
            k: self.k.or(file.k),
            c: self.c.or(file.c),
            p: self.p.or(file.p),
            seed: self.seed.or(file.seed),
            trials: self.trials.or(file.trials),
            activation_mode: self.activation_mode.or(file.activation_mode),
            activation: self.activation.or(file.activation),
            kind: self.kind.or(file.kind),
            out: self.out.or(file.out),
            csv: self.csv.or(file.csv),
            save_model: self.save_model.or(file.save_model),
            threads: self.threads.or(file.threads),
            config: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Quantize,
    Prune,
    QuantizePrune,
    VerifyBounds,
    CompareRtn,
    SvdCheck,
}

/// Fully resolved run parameters. Serialized as the report's config echo;
/// output paths and thread count are left out so they cannot affect it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub kind: OperatorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_path: Option<PathBuf>,
    pub m: usize,
    pub distribution: DataDistribution,
    #[serde(rename = "C")]
    pub scale: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub p: f64,
    pub seed: u64,
    pub trials: usize,
    pub activation_mode: ActivationMode,
    pub activation: Activation,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    #[serde(skip)]
    pub csv_path: Option<PathBuf>,
    #[serde(skip)]
    pub save_model_path: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing input; exit code 2.
    Input { field: String, message: String },
    /// A check ran and failed; exit code 1.
    Validation(String),
    /// Runtime failure (I/O, numerics); exit code 2.
    Runtime(String),
}

impl CliError {
    fn input(field: &str, message: impl Into<String>) -> Self {
        CliError::Input {
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn missing(field: &str) -> Self {
        Self::input(field, "missing required field")
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Input { .. } | CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input { field, message } => write!(f, "invalid input for field '{field}': {message}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn runtime<E: fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// `ceil(ln(N0·N1))`, floored at 1.
pub fn default_scale(n0: usize, n1: usize) -> f64 {
    ((n0 as f64) * (n1 as f64)).ln().ceil().max(1.0)
}

fn parse_field<T: std::str::FromStr>(field: &str, raw: Option<String>, default: T) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    match raw {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: T::Err| CliError::input(field, e.to_string())),
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s.to_ascii_lowercase().as_str() {
        "relu" => Ok(Activation::Relu),
        "identity" | "linear" => Ok(Activation::Identity),
        other => Err(format!("unknown activation '{other}' (expected relu or identity)")),
    }
}

fn parse_mode(s: &str) -> Result<ActivationMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "paired" => Ok(ActivationMode::Paired),
        "shared" => Ok(ActivationMode::Shared),
        other => Err(format!("unknown activation mode '{other}' (expected paired or shared)")),
    }
}

/// Seed from `SPFC_SEED` if set, else `--seed`, else 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map_err(|e| CliError::input(SEED_ENV, format!("'{s}' is not a u64: {e}"))),
        _ => Ok(flag.unwrap_or(0)),
    }
}

impl RunConfig {
    /// Resolves flags, config file and environment into a validated config.
    pub fn resolve(command: Command, args: RunArgs) -> Result<Self, CliError> {
        let args = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
                let file: ConfigFile =
                    serde_json::from_str(&text).map_err(|e| CliError::input("config", e.to_string()))?;
                args.merge(file)
            }
            None => args,
        };

        let kind = match (command, args.kind.as_deref()) {
            (Command::Prune, None) => OperatorKind::Prune,
            (Command::QuantizePrune, None) => OperatorKind::QuantizePrune,
            (_, None) => OperatorKind::OnebitQuantize,
            (_, Some(s)) => s.parse().map_err(|e: crate::operators::OperatorError| CliError::input("kind", e.to_string()))?,
        };
        let allowed: &[OperatorKind] = match command {
            Command::Quantize => &[OperatorKind::OnebitQuantize, OperatorKind::RtnOnebit, OperatorKind::Identity],
            Command::Prune => &[OperatorKind::Prune],
            Command::QuantizePrune => &[OperatorKind::QuantizePrune],
            Command::VerifyBounds => &[OperatorKind::OnebitQuantize, OperatorKind::Prune, OperatorKind::QuantizePrune],
            Command::CompareRtn => &[OperatorKind::OnebitQuantize],
            Command::SvdCheck => &OperatorKind::ALL,
        };
        if !allowed.contains(&kind) {
            return Err(CliError::input("kind", format!("{kind} is not valid for this command")));
        }

        let compressing = matches!(command, Command::Quantize | Command::Prune | Command::QuantizePrune);
        if compressing {
            match (&args.model, &args.dims) {
                (Some(_), Some(_)) => return Err(CliError::input("dims", "give either --model or --dims, not both")),
                (None, None) => return Err(CliError::input("dims", "missing required field (or give --model)")),
                _ => {}
            }
        } else if args.model.is_some() {
            return Err(CliError::input("model", "only the compression commands accept a model"));
        }
        if let Some(d) = &args.dims {
            if d.is_empty() || d.contains(&0) {
                return Err(CliError::input("dims", "widths must be positive"));
            }
            let needed = match command {
                Command::VerifyBounds => Some(2),
                Command::SvdCheck => Some(1),
                _ => None,
            };
            if let Some(n) = needed {
                if d.len() != n {
                    return Err(CliError::input("dims", format!("expected {n} value(s), got {}", d.len())));
                }
            } else if compressing && d.len() < 2 {
                return Err(CliError::input("dims", "need at least two widths"));
            }
        }

        let k = match (args.k, compressing && args.model.is_none()) {
            (Some(k), _) => k,
            (None, true) => return Err(CliError::missing("K")),
            (None, false) => match &args.model {
                Some(path) => load_model(path).map_err(|e| CliError::input("model", e.to_string()))?.k(),
                None => 1.0,
            },
        };
        if !(k.is_finite() && k > 0.0) {
            return Err(CliError::input("K", format!("must be finite and > 0, got {k}")));
        }

        let c = if kind.needs_threshold() {
            let c = args.c.ok_or_else(|| CliError::missing("c"))?;
            if !(c > 0.0 && c <= 1.0) {
                return Err(CliError::input("c", format!("must lie in (0, 1], got {c}")));
            }
            Some(c)
        } else {
            None
        };

        let p = args.p.unwrap_or(1.0);
        if !(p.is_finite() && p >= 1.0) {
            return Err(CliError::input("p", format!("must be >= 1, got {p}")));
        }

        let m = match command {
            Command::CompareRtn => args.m.unwrap_or(16),
            Command::SvdCheck => args.m.unwrap_or(64),
            _ => args.m.unwrap_or(32),
        };
        if m == 0 {
            return Err(CliError::input("m", "must be positive"));
        }

        let dims = match command {
            Command::VerifyBounds => Some(args.dims.clone().unwrap_or_else(|| vec![256, 16])),
            Command::CompareRtn => Some(args.dims.clone().unwrap_or_else(|| vec![64, 256, 1024])),
            Command::SvdCheck => Some(args.dims.clone().unwrap_or_else(|| vec![8])),
            _ => args.dims.clone(),
        };

        let scale = match args.scale {
            Some(c) => c,
            None => match command {
                Command::CompareRtn => 9.0,
                Command::SvdCheck => 4.0,
                _ => {
                    let widths = match (&dims, &args.model) {
                        (Some(d), _) => d.clone(),
                        (None, Some(path)) => load_model(path).map_err(|e| CliError::input("model", e.to_string()))?.dims(),
                        (None, None) => unreachable!("checked above"),
                    };
                    let (n0, n1) = widths
                        .windows(2)
                        .map(|w| (w[0], w[1]))
                        .max_by_key(|(a, b)| a * b)
                        .unwrap_or((widths[0], 1));
                    default_scale(n0, n1)
                }
            },
        };
        if !(scale.is_finite() && scale >= 1.0) {
            return Err(CliError::input("C", format!("must be >= 1, got {scale}")));
        }

        let trials = args.trials.unwrap_or(match command {
            Command::VerifyBounds => 200,
            Command::CompareRtn => 100,
            Command::SvdCheck => 20,
            _ => 1,
        });
        if trials == 0 && !compressing {
            return Err(CliError::input("trials", "must be positive"));
        }
        if args.threads == Some(0) {
            return Err(CliError::input("threads", "must be positive"));
        }

        Ok(RunConfig {
            command,
            kind,
            model_path: args.model,
            dims,
            data_path: args.data,
            m,
            distribution: parse_field("distribution", args.distribution, DataDistribution::Uniform)?,
            scale,
            k,
            c,
            p,
            seed: resolve_seed(args.seed)?,
            trials,
            activation_mode: match args.activation_mode {
                None => ActivationMode::Shared,
                Some(s) => parse_mode(&s).map_err(|e| CliError::input("activation_mode", e))?,
            },
            activation: match args.activation {
                None => Activation::Relu,
                Some(s) => parse_activation(&s).map_err(|e| CliError::input("activation", e))?,
            },
            output_path: args.out,
            csv_path: args.csv,
            save_model_path: args.save_model,
            threads: args.threads,
        })
    }

    pub fn operator(&self) -> Result<OperatorSpec, CliError> {
        OperatorSpec::new(self.kind, self.k, self.c).map_err(|e| CliError::input("kind", e.to_string()))
    }

    fn compression_config(&self) -> Result<CompressionConfig, CliError> {
        Ok(CompressionConfig::new(self.scale, self.operator()?, self.seed)
            .map_err(|e| CliError::input("C", e.to_string()))?
            .with_mode(self.activation_mode)
            .with_threads(self.threads))
    }

    /// `m × n0` data from `--data` or generated from the seed.
    fn data(&self, n0: usize) -> Result<DenseMatrix, CliError> {
        match &self.data_path {
            Some(path) => {
                let x = mat1::load(path).map_err(|e| CliError::input("data", format!("{}: {e}", path.display())))?;
                if x.cols() != n0 {
                    return Err(CliError::input(
                        "data",
                        format!("expected {n0} columns to match the input width, got {}", x.cols()),
                    ));
                }
                Ok(x)
            }
            None => Ok(synthetic_data(self.m, n0, self.distribution, self.seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub n0: usize,
    pub n1: usize,
    /// Radius for the max post-activation error; absent for operators without a bound.
    pub kappa: Option<f64>,
    /// Failure mass clamped to `[0, 1]`.
    pub failure_mass: Option<f64>,
    pub max_error_pre: f64,
    pub max_error_post: f64,
    /// Counts of each value of `Q` (discrete operators only).
    pub support_histogram: Option<Vec<HistogramBin>>,
    pub sparsity_fraction: f64,
    pub saturation_events: usize,
    /// `‖u_{N₀}‖_∞` per neuron.
    pub final_u_inf: Vec<f64>,
    pub weight_bound_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub layer_secs: Vec<f64>,
}

/// Report body specific to each command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportBody {
    Compression {
        per_layer: Vec<LayerReport>,
    },
    Bounds {
        proposition: BoundReport,
        theorem: Option<TheoremReport>,
        pass: bool,
    },
    Rtn {
        rows: Vec<RtnRow>,
        pass: bool,
    },
    Svd {
        instances: Vec<SvdSummary>,
        pass: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdSummary {
    pub rank: usize,
    pub q_equal: bool,
    pub relative_norm_diff: f64,
    pub pass: bool,
}

impl From<&SvdEquivalence> for SvdSummary {
    fn from(r: &SvdEquivalence) -> Self {
        Self {
            rank: r.rank,
            q_equal: r.q_equal,
            relative_norm_diff: r.relative_norm_diff,
            pass: r.pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: u32,
    pub command: Command,
    pub config: RunConfig,
    pub seed: u64,
    #[serde(flatten)]
    pub body: ReportBody,
    pub timing: Timing,
}

impl Report {
    /// Whether the command's checks passed (always true for plain compression).
    pub fn passed(&self) -> bool {
        match &self.body {
            ReportBody::Compression { .. } => true,
            ReportBody::Bounds { pass, .. } | ReportBody::Rtn { pass, .. } | ReportBody::Svd { pass, .. } => *pass,
        }
    }
}

fn histogram(q: &DenseMatrix) -> Vec<HistogramBin> {
    let mut counts: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for &v in q.as_slice() {
        // Normalize -0.0 so it shares a bin with 0.0.
        let v = if v == 0.0 { 0.0 } else { v };
        let key = ordered_key(v);
        counts.entry(key).or_insert((v, 0)).1 += 1;
    }
    counts.into_values().map(|(value, count)| HistogramBin { value, count }).collect()
}

/// Total order on finite floats as a signed integer.
fn ordered_key(v: f64) -> i64 {
    let bits = v.to_bits() as i64;
    if bits < 0 {
        i64::MIN - bits
    } else {
        bits
    }
}

fn layer_reports(cfg: &RunConfig, op: &OperatorSpec, result: &CompressionResult, result_m: usize) -> Vec<LayerReport> {
    result
        .layers
        .iter()
        .enumerate()
        .map(|(i, lr)| {
            let q = &lr.compression.q;
            let bounds = BoundInputs::from_norms(lr.input_column_norms.clone(), result_m, q.cols(), op, cfg.scale, cfg.p).ok();
            let kappa = bounds.as_ref().and_then(|b| kappa(b, op.kind()).ok());
            let failure = bounds
                .as_ref()
                .and_then(|b| failure_mass(b, op.kind()).ok())
                .map(|f| f.clamp(0.0, 1.0));
            let zeros = q.as_slice().iter().filter(|&&v| v == 0.0).count();
            LayerReport {
                layer: i,
                n0: q.rows(),
                n1: q.cols(),
                kappa,
                failure_mass: failure,
                max_error_pre: lr.max_error_pre,
                max_error_post: lr.max_error_post,
                support_histogram: op.kind().is_discrete().then(|| histogram(q)),
                sparsity_fraction: zeros as f64 / q.as_slice().len() as f64,
                saturation_events: lr.compression.saturation_events(),
                final_u_inf: lr.compression.final_u_inf(),
                weight_bound_exceeded: lr.compression.weight_bound_exceeded(),
            }
        })
        .collect()
}

fn run_compression(cfg: &RunConfig) -> Result<(ReportBody, Vec<f64>), CliError> {
    let net: MlpModel = match (&cfg.model_path, &cfg.dims) {
        (Some(path), _) => load_model(path).map_err(|e| CliError::input("model", e.to_string()))?,
        (None, Some(dims)) => init_random_mlp(dims, cfg.k, cfg.seed, cfg.activation).map_err(|e| CliError::input("dims", e.to_string()))?,
        (None, None) => return Err(CliError::missing("dims")),
    };
    let op = cfg.operator()?;
    let ccfg = CompressionConfig::new(cfg.scale, op, cfg.seed)
        .map_err(|e| CliError::input("C", e.to_string()))?
        .with_mode(cfg.activation_mode)
        .with_threads(cfg.threads);
    let x = match &cfg.data_path {
        Some(path) => {
            let raw = mat1::load(path).map_err(|e| CliError::input("data", format!("{}: {e}", path.display())))?;
            // Models with absorbed biases take one extra constant input column.
            if raw.cols() + 1 == net.input_dim() {
                augment_input(&raw)
            } else if raw.cols() == net.input_dim() {
                raw
            } else {
                return Err(CliError::input(
                    "data",
                    format!("{} columns do not match model input width {}", raw.cols(), net.input_dim()),
                ));
            }
        }
        None => synthetic_data(cfg.m, net.input_dim(), cfg.distribution, cfg.seed),
    };
    let result = compress_network(&net, &x, &ccfg).map_err(runtime)?;
    if let Some(path) = &cfg.save_model_path {
        save_model(&result.compressed, path).map_err(runtime)?;
    }
    let times = result.layers.iter().map(|l| l.compression.elapsed_secs).collect();
    Ok((
        ReportBody::Compression {
            per_layer: layer_reports(cfg, &op, &result, x.rows()),
        },
        times,
    ))
}

fn run_verify_bounds(cfg: &RunConfig) -> Result<ReportBody, CliError> {
    let dims = cfg.dims.as_ref().ok_or_else(|| CliError::missing("dims"))?;
    let (n0, n1) = (dims[0], dims[1]);
    let x = cfg.data(n0)?;
    let ccfg = cfg.compression_config()?.with_mode(ActivationMode::Shared);
    let setup = PropositionSetup {
        x: x.clone(),
        n1,
        p: cfg.p,
        trials: cfg.trials,
        weight_seed: mix_seed(cfg.seed, 0x5745_4947_4854),
        activation: cfg.activation,
    };
    let proposition = verify_proposition(&ccfg, &setup).map_err(runtime)?;
    if proposition.verdict == Verdict::Vacuous {
        log::warn!(
            "failure mass {:.3e} >= 1: the bound is vacuous at this scale",
            proposition.failure_mass_raw
        );
    }
    let theorem = if cfg.trials >= analysis::MIN_THEOREM_TRIALS {
        let samples = theorem_trials(&x, &ccfg, cfg.trials, mix_seed(cfg.seed, 0x4E45_5552_4F4E)).map_err(runtime)?;
        let inputs = BoundInputs::from_data(&x, 1, &ccfg.operator, cfg.scale, cfg.p).map_err(runtime)?;
        Some(verify_theorem(&samples, &inputs, None).map_err(runtime)?)
    } else {
        None
    };
    let pass = proposition.verdict != Verdict::Fail && theorem.as_ref().is_none_or(|t| t.pass);
    Ok(ReportBody::Bounds {
        proposition,
        theorem,
        pass,
    })
}

/// RTN matches its closed form and the RTN/SPFC ratio grows strictly with N0.
pub fn rtn_rows_pass(rows: &[RtnRow]) -> bool {
    let exact = rows
        .iter()
        .all(|r| (r.rtn_error - r.rtn_expected).abs() <= 1e-10 * r.rtn_expected.abs());
    let increasing = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    exact && increasing
}

fn run_compare_rtn(cfg: &RunConfig) -> Result<ReportBody, CliError> {
    let n0_list = cfg.dims.clone().ok_or_else(|| CliError::missing("dims"))?;
    if n0_list.iter().any(|&n| n < 2) {
        return Err(CliError::input("dims", "every N0 must be at least 2"));
    }
    let setup = RtnSetup {
        n0_list,
        k: cfg.k,
        scale: cfg.scale,
        p: cfg.p,
        m: cfg.m,
        trials: cfg.trials,
        seed: cfg.seed,
    };
    let rows = crate::compressor::with_pool(cfg.threads, || rtn_comparison(&setup))
        .map_err(runtime)?
        .map_err(runtime)?;
    if let Some(path) = &cfg.csv_path {
        write_text(path, &rtn_table_csv(&rows))?;
    }
    let pass = rtn_rows_pass(&rows);
    Ok(ReportBody::Rtn { rows, pass })
}

fn run_svd_check(cfg: &RunConfig) -> Result<ReportBody, CliError> {
    let n0 = cfg.dims.as_ref().ok_or_else(|| CliError::missing("dims"))?[0];
    let ccfg = cfg.compression_config()?;
    let instances = (0..cfg.trials as u64)
        .map(|i| {
            let seed = mix_seed(cfg.seed, i);
            let x = match &cfg.data_path {
                Some(_) => cfg.data(n0)?,
                None => synthetic_data(cfg.m, n0, cfg.distribution, seed),
            };
            let mut rng = RngStream::derive(seed, usize::MAX - 2, 0);
            let w: Vec<f64> = (0..n0).map(|_| cfg.k * (2.0 * rng.next_f64() - 1.0) * 0.999).collect();
            let r = svd_equivalence_experiment(&x, &w, &ccfg.clone().with_seed(seed)).map_err(runtime)?;
            Ok(SvdSummary::from(&r))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let pass = instances.iter().all(|s| s.pass);
    Ok(ReportBody::Svd { instances, pass })
}

/// Executes a resolved config and returns the report.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let started = Instant::now();
    let (body, layer_secs) = match cfg.command {
        Command::Quantize | Command::Prune | Command::QuantizePrune => run_compression(cfg)?,
        Command::VerifyBounds => (run_verify_bounds(cfg)?, Vec::new()),
        Command::CompareRtn => (run_compare_rtn(cfg)?, Vec::new()),
        Command::SvdCheck => (run_svd_check(cfg)?, Vec::new()),
    };
    Ok(Report {
        version: REPORT_VERSION,
        command: cfg.command,
        config: cfg.clone(),
        seed: cfg.seed,
        body,
        timing: Timing {
            total_secs: started.elapsed().as_secs_f64(),
            layer_secs,
        },
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Serializes `report` as pretty JSON to `path`, or stdout when `None`.
///
/// Floats use the shortest decimal form that parses back to the same `f64`.
pub fn emit_report(report: &Report, path: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).map_err(runtime)?;
    text.push('\n');
    match path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Resolves, runs and reports one invocation. Returns the process exit code.
pub fn run(command: CommandArgs) -> i32 {
    let (cmd, args) = command.split();
    let outcome = RunConfig::resolve(cmd, args).and_then(|cfg| {
        let report = execute(&cfg)?;
        emit_report(&report, cfg.output_path.as_deref())?;
        if report.passed() {
            Ok(())
        } else {
            Err(CliError::Validation(format!("{:?} checks did not pass; see the report", cmd)))
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spfc: {e}");
            e.exit_code()
        }
    }
}

/// Entry point used by the `spfc` binary.
pub fn main_entry() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run(Cli::parse().command)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> RunArgs {
        RunArgs {
            dims: Some(vec![8, 4]),
            k: Some(1.0),
            scale: Some(4.0),
            m: Some(6),
            ..RunArgs::default()
        }
    }

    #[test]
    fn missing_k_names_field() {
        let mut a = args();
        a.k = None;
        match RunConfig::resolve(Command::Quantize, a) {
            Err(CliError::Input { field, .. }) => assert_eq!(field, "K"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prune_needs_c() {
        let err = RunConfig::resolve(Command::Prune, args()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("'c'"));
    }

    #[test]
    fn model_and_dims_exclusive() {
        let mut a = args();
        a.model = Some("m.json".into());
        assert!(RunConfig::resolve(Command::Quantize, a).is_err());
        let mut a = args();
        a.dims = None;
        assert!(RunConfig::resolve(Command::Quantize, a).is_err());
    }

    #[test]
    fn bad_values_rejected() {
        for (field, f) in [
            ("C", Box::new(|a: &mut RunArgs| a.scale = Some(0.5)) as Box<dyn Fn(&mut RunArgs)>),
            ("p", Box::new(|a: &mut RunArgs| a.p = Some(0.0))),
            ("distribution", Box::new(|a: &mut RunArgs| a.distribution = Some("cauchy".into()))),
            ("activation_mode", Box::new(|a: &mut RunArgs| a.activation_mode = Some("both".into()))),
            ("kind", Box::new(|a: &mut RunArgs| a.kind = Some("prune".into()))),
        ] {
            let mut a = args();
            f(&mut a);
            match RunConfig::resolve(Command::Quantize, a) {
                Err(CliError::Input { field: got, .. }) => assert_eq!(got, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn verify_bounds_defaults() {
        let cfg = RunConfig::resolve(
            Command::VerifyBounds,
            RunArgs {
                dims: Some(vec![256, 16]),
                ..RunArgs::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.k, 1.0);
        assert_eq!(cfg.scale, 9.0);
        assert_eq!(cfg.trials, 200);
        assert_eq!(cfg.kind, OperatorKind::OnebitQuantize);
    }

    #[test]
    fn identity_run_has_zero_error() {
        let mut a = args();
        a.kind = Some("identity".into());
        let cfg = RunConfig::resolve(Command::Quantize, a).unwrap();
        let report = execute(&cfg).unwrap();
        let ReportBody::Compression { per_layer } = &report.body else {
            panic!()
        };
        assert!(per_layer.iter().all(|l| l.max_error_post == 0.0 && l.max_error_pre == 0.0));
        assert!(per_layer.iter().all(|l| l.kappa.is_none()));
    }

    #[test]
    fn histogram_sorted_and_merges_signed_zero() {
        let q = DenseMatrix::from_vec(1, 5, vec![2.0, -2.0, 0.0, -0.0, 2.0]).unwrap();
        let h = histogram(&q);
        assert_eq!(
            h,
            vec![
                HistogramBin { value: -2.0, count: 1 },
                HistogramBin { value: 0.0, count: 2 },
                HistogramBin { value: 2.0, count: 2 }
            ]
        );
    }

    #[test]
    fn default_scale_values() {
        assert_eq!(default_scale(256, 16), 9.0);
        assert_eq!(default_scale(1, 1), 1.0);
    }
}
