//! Monte Carlo validators for the accumulated-error tail bound and the
//! single-layer error guarantees, plus the RTN and SVD comparison experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{beta_sequence, failure_mass, gaussian_tail, gaussian_tail_radius, kappa, BoundInputs};
use super::AnalysisError;
use crate::compressor::{
    compress_layer_with, compress_neuron_with, layer_errors, with_pool, CompressionConfig, LayerData, NeuronParams,
};
use crate::network::{init_random_mlp, Activation};
use crate::numerics::{self, norm2, svd, DenseMatrix, DEFAULT_RANK_TOL};
use crate::operators::{mix_seed, on_grid, on_offset_grid, OperatorKind, RngStream, StochasticOperator};

/// Fewest samples [`verify_theorem`] accepts.
pub const MIN_THEOREM_TRIALS: usize = 50;

/// Tail levels `γ` that define the default `α` grid.
pub const DEFAULT_GAMMAS: [f64; 10] = [1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001];

/// Stream slot for random weights, away from the per-layer operator streams.
const WEIGHT_STREAM: usize = usize::MAX - 1;

/// Three binomial standard errors at success probability `p`.
pub fn binomial_slack(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Median of a sample (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `α` values where the Gaussian tail bound equals each of [`DEFAULT_GAMMAS`].
pub fn default_alpha_grid(beta: f64, m: usize) -> Vec<f64> {
    DEFAULT_GAMMAS.iter().map(|&g| gaussian_tail_radius(g, beta, m)).collect()
}

fn uniform_weights(n: usize, k: f64, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::derive(seed, WEIGHT_STREAM, 0);
    (0..n)
        .map(|_| loop {
            let x = k * (2.0 * rng.next_f64() - 1.0);
            if x.abs() < k {
                break x;
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCheck {
    pub alpha: f64,
    pub bound: f64,
    pub empirical: f64,
    pub slack: f64,
    /// `bound + slack − empirical`; negative means violated.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub trials: usize,
    /// `β_{N₀}` used as the Gaussian variance proxy.
    pub beta: f64,
    pub checks: Vec<AlphaCheck>,
    pub worst_margin: f64,
    pub pass: bool,
}

/// Final `‖u_{N₀}‖_∞` of one neuron per trial.
///
/// `X` is fixed. Each trial draws fresh weights uniform on `(−K, K)` from
/// `mix(weight_seed, trial)` and a fresh operator stream from
/// `mix(master_seed, trial)`.
pub fn theorem_trials(
    x: &DenseMatrix,
    cfg: &CompressionConfig,
    trials: usize,
    weight_seed: u64,
) -> Result<Vec<f64>, AnalysisError> {
    cfg.validate()?;
    let data = LayerData::new(x, None)?;
    let params = NeuronParams::from(cfg);
    let k = cfg.operator.k();
    let run = || {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let w = uniform_weights(x.cols(), k, mix_seed(weight_seed, t));
                let mut rng = RngStream::derive(mix_seed(cfg.master_seed, t), 0, 0);
                let trace = compress_neuron_with(&w, &data, params, &cfg.operator, &mut rng)?;
                Ok(numerics::norm_inf(&trace.u_final))
            })
            .collect::<Result<Vec<_>, AnalysisError>>()
    };
    with_pool(cfg.threads, run)?
}

/// Checks `P(‖u‖_∞ > α) ≤ gaussian_tail(α, β_{N₀}, m) + 3·SE` on every `α` of
/// the grid (default: [`default_alpha_grid`]). The standard error is taken at
/// the bound probability.
pub fn verify_theorem(
    samples: &[f64],
    inputs: &BoundInputs,
    alphas: Option<&[f64]>,
) -> Result<TheoremReport, AnalysisError> {
    let n = samples.len();
    if n < MIN_THEOREM_TRIALS {
        return Err(AnalysisError::TooFewTrials {
            min: MIN_THEOREM_TRIALS,
            got: n,
        });
    }
    let beta = *beta_sequence(inputs).last().unwrap();
    let grid = alphas.map_or_else(|| default_alpha_grid(beta, inputs.m), <[f64]>::to_vec);
    let checks: Vec<AlphaCheck> = grid
        .iter()
        .map(|&alpha| {
            let bound = gaussian_tail(alpha, beta, inputs.m);
            let empirical = samples.iter().filter(|&&s| s > alpha).count() as f64 / n as f64;
            let slack = binomial_slack(bound, n);
            let margin = bound + slack - empirical;
            AlphaCheck {
                alpha,
                bound,
                empirical,
                slack,
                margin,
                pass: margin >= 0.0,
            }
        })
        .collect();
    let worst_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    Ok(TheoremReport {
        trials: n,
        beta,
        pass: checks.iter().all(|c| c.pass),
        checks,
        worst_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The failure mass is at least 1, so the bound makes no claim.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmpiricalCounts {
    pub trials: usize,
    /// Trials whose max post-activation error exceeded `κ`.
    pub error_exceed_count: usize,
    /// Trials with an entry of `Q` outside the operator's bounded alphabet.
    pub support_violation_count: usize,
    /// Trials with either of the above.
    pub joint_failure_count: usize,
    pub max_observed_error: f64,
    pub max_abs_q: f64,
    /// Mean fraction of zero entries in `Q`.
    pub sparsity_fraction: f64,
    /// Per-trial max post-activation error.
    #[serde(default, skip_serializing)]
    pub trial_max_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: OperatorKind,
    pub kappa: f64,
    /// Failure mass clamped to `[0, 1]`.
    pub failure_probability: f64,
    /// Failure mass before clamping.
    pub failure_mass_raw: f64,
    /// `β_t` for `t = 0..N₀`.
    pub beta: Vec<f64>,
    pub slack: f64,
    pub failure_frequency: f64,
    pub empirical: EmpiricalCounts,
    pub verdict: Verdict,
}

/// Single-layer experiment description for [`verify_proposition`].
#[derive(Debug, Clone)]
pub struct PropositionSetup {
    /// Fixed data `X` (m × N₀).
    pub x: DenseMatrix,
    pub n1: usize,
    pub p: f64,
    pub trials: usize,
    /// Seeds the fresh `N₀ × N₁` weights drawn for each trial.
    pub weight_seed: u64,
    pub activation: Activation,
}

struct TrialOutcome {
    max_error: f64,
    exceed: bool,
    support_violation: bool,
    max_abs_q: f64,
    zero_fraction: f64,
}

/// `q` lies outside the bounded alphabet `κ` assumes.
fn support_violation(kind: OperatorKind, q: f64, k: f64) -> bool {
    let bounded = q.abs() <= 2.0 * k * (1.0 + 1e-12);
    match kind {
        OperatorKind::OnebitQuantize => !(bounded && on_offset_grid(q, k)),
        OperatorKind::QuantizePrune => !(bounded && on_grid(q, 2.0 * k)),
        _ => false,
    }
}

/// Runs `setup.trials` independent compressions of a fresh random layer and
/// compares the outcome to `κ` and the failure mass. Always uses `X̃ = X`.
///
/// Trial `t` draws weights from `mix(weight_seed, t)` and compresses with
/// master seed `mix(cfg.master_seed, t)`.
pub fn verify_proposition(cfg: &CompressionConfig, setup: &PropositionSetup) -> Result<BoundReport, AnalysisError> {
    cfg.validate()?;
    if setup.trials == 0 {
        return Err(AnalysisError::TooFewTrials { min: 1, got: 0 });
    }
    let kind = cfg.operator.kind();
    let k = cfg.operator.k();
    let inputs = BoundInputs::from_data(&setup.x, setup.n1, &cfg.operator, cfg.scale, setup.p)?;
    let radius = kappa(&inputs, kind)?;
    let raw = failure_mass(&inputs, kind)?;
    let fp = raw.clamp(0.0, 1.0);
    let data = LayerData::new(&setup.x, None)?;
    let params = NeuronParams::from(cfg);
    let dims = [setup.x.cols(), setup.n1];

    let run = || {
        (0..setup.trials as u64)
            .into_par_iter()
            .map(|t| {
                let w = init_random_mlp(&dims, k, mix_seed(setup.weight_seed, t), setup.activation)?
                    .layer(0)
                    .clone();
                let comp = compress_layer_with(&w, &data, params, &cfg.operator, mix_seed(cfg.master_seed, t), 0, None)?;
                let (_, post) = layer_errors(&setup.x, &w, &setup.x, &comp.q, setup.activation)?;
                let qs = comp.q.as_slice();
                Ok(TrialOutcome {
                    max_error: post,
                    exceed: post > radius,
                    support_violation: qs.iter().any(|&q| support_violation(kind, q, k)),
                    max_abs_q: comp.q.max_abs(),
                    zero_fraction: qs.iter().filter(|&&q| q == 0.0).count() as f64 / qs.len() as f64,
                })
            })
            .collect::<Result<Vec<_>, AnalysisError>>()
    };
    let outcomes = with_pool(cfg.threads, run)??;

    let trials = outcomes.len();
    let empirical = EmpiricalCounts {
        trials,
        error_exceed_count: outcomes.iter().filter(|o| o.exceed).count(),
        support_violation_count: outcomes.iter().filter(|o| o.support_violation).count(),
        joint_failure_count: outcomes.iter().filter(|o| o.exceed || o.support_violation).count(),
        max_observed_error: outcomes.iter().map(|o| o.max_error).fold(0.0, f64::max),
        max_abs_q: outcomes.iter().map(|o| o.max_abs_q).fold(0.0, f64::max),
        sparsity_fraction: outcomes.iter().map(|o| o.zero_fraction).sum::<f64>() / trials as f64,
        trial_max_errors: outcomes.iter().map(|o| o.max_error).collect(),
    };
    let slack = binomial_slack(fp, trials);
    let failure_frequency = empirical.joint_failure_count as f64 / trials as f64;
    let verdict = if raw >= 1.0 {
        Verdict::Vacuous
    } else if failure_frequency <= fp + slack {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(BoundReport {
        kind,
        kappa: radius,
        failure_probability: fp,
        failure_mass_raw: raw,
        beta: beta_sequence(&inputs),
        slack,
        failure_frequency,
        empirical,
        verdict,
    })
}

/// Parameters of the coherent round-to-nearest comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtnSetup {
    pub n0_list: Vec<usize>,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C")]
    pub scale: f64,
    pub p: f64,
    /// Rows of `X`.
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
}

impl RtnSetup {
    pub fn new(n0_list: Vec<usize>, k: f64, scale: f64, seed: u64) -> Self {
        Self {
            n0_list,
            k,
            scale,
            p: 1.0,
            m: 16,
            trials: 100,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtnRow {
    pub n0: usize,
    /// Measured `‖X(w − q_rtn)‖`.
    pub rtn_error: f64,
    /// Closed form `N₀·|w − 2K|·‖X_1‖`.
    pub rtn_expected: f64,
    /// Median over trials of `‖X(w − q)‖` for the stochastic 1-bit run.
    pub spfc_error: f64,
    /// Fraction of trials with error at most `κ`.
    pub spfc_within_kappa: f64,
    pub kappa: f64,
    /// `rtn_error / spfc_error`
    pub ratio: f64,
}

/// Round-to-nearest against stochastic 1-bit compression on an instance where
/// every column of `X` equals one fixed unit vector and every weight is
/// `0.999K`, so rounding errors add coherently.
pub fn rtn_comparison(setup: &RtnSetup) -> Result<Vec<RtnRow>, AnalysisError> {
    let k = setup.k;
    let onebit = crate::operators::OperatorSpec::onebit(k)?;
    let rtn = crate::operators::OperatorSpec::rtn(k)?;
    let cfg = CompressionConfig::new(setup.scale, onebit, setup.seed)?;
    let params = NeuronParams::from(&cfg);
    let mut dir = super::data::synthetic_data(setup.m, 1, super::DataDistribution::Gaussian, setup.seed).into_vec();
    let len = norm2(&dir);
    dir.iter_mut().for_each(|v| *v /= len);

    setup
        .n0_list
        .iter()
        .map(|&n0| {
            let x = DenseMatrix::from_fn(setup.m, n0, |i, _| dir[i]);
            let w = vec![0.999 * k; n0];
            let error = |q: &[f64]| -> Result<f64, AnalysisError> {
                let diff: Vec<f64> = w.iter().zip(q).map(|(a, b)| a - b).collect();
                Ok(norm2(&numerics::matvec(&x, &diff)?))
            };
            let q_rtn: Vec<f64> = w.iter().map(|&v| rtn.apply(v, &mut RngStream::from_key(0))).collect::<Result<_, _>>()?;
            let rtn_error = error(&q_rtn)?;
            let rtn_expected = n0 as f64 * (2.0 * k - 0.999 * k) * norm2(&dir);

            let inputs = BoundInputs::from_data(&x, 1, &cfg.operator, cfg.scale, setup.p)?;
            let radius = kappa(&inputs, OperatorKind::OnebitQuantize)?;
            let data = LayerData::new(&x, None)?;
            let errors = (0..setup.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = RngStream::derive(mix_seed(setup.seed, t), n0, 0);
                    let trace = compress_neuron_with(&w, &data, params, &cfg.operator, &mut rng)?;
                    error(&trace.q)
                })
                .collect::<Result<Vec<_>, AnalysisError>>()?;
            let spfc_error = median(&errors);
            let within = errors.iter().filter(|&&e| e <= radius).count() as f64 / errors.len().max(1) as f64;
            Ok(RtnRow {
                n0,
                rtn_error,
                rtn_expected,
                spfc_error,
                spfc_within_kappa: within,
                kappa: radius,
                ratio: rtn_error / spfc_error,
            })
        })
        .collect()
}

/// CSV table with header `N0,rtn_error,spfc_error,kappa,ratio`.
pub fn rtn_table_csv(rows: &[RtnRow]) -> String {
    let mut out = String::from("N0,rtn_error,spfc_error,kappa,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n0, r.rtn_error, r.spfc_error, r.kappa, r.ratio
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdEquivalence {
    pub rank: usize,
    pub q_equal: bool,
    pub q_x: Vec<f64>,
    pub q_svt: Vec<f64>,
    /// `‖X(w − q)‖`
    pub norm_x: f64,
    /// `‖ΣVᵀ(w − q)‖`
    pub norm_svt: f64,
    pub relative_norm_diff: f64,
    pub pass: bool,
}

/// Compresses `w` against `X` and against its reduced form `ΣVᵀ` with the
/// same operator stream. Passes when both `q` agree bitwise and the two
/// error norms agree within `1e-8` relative.
pub fn svd_equivalence_experiment(x: &DenseMatrix, w: &[f64], cfg: &CompressionConfig) -> Result<SvdEquivalence, AnalysisError> {
    let stream = RngStream::derive(cfg.master_seed, 0, 0);
    svd_equivalence_with_streams(x, w, cfg, stream.clone(), stream)
}

/// [`svd_equivalence_experiment`] with explicit streams for each run.
pub fn svd_equivalence_with_streams(
    x: &DenseMatrix,
    w: &[f64],
    cfg: &CompressionConfig,
    mut rng_x: RngStream,
    mut rng_svt: RngStream,
) -> Result<SvdEquivalence, AnalysisError> {
    cfg.validate()?;
    let factors = svd(x, DEFAULT_RANK_TOL)?;
    let svt = factors.sigma_vt();
    let params = NeuronParams::from(cfg);
    let q_x = compress_neuron_with(w, &LayerData::new(x, None)?, params, &cfg.operator, &mut rng_x)?.q;
    let q_svt = compress_neuron_with(w, &LayerData::new(&svt, None)?, params, &cfg.operator, &mut rng_svt)?.q;
    let q_equal = q_x.len() == q_svt.len() && q_x.iter().zip(&q_svt).all(|(a, b)| a.to_bits() == b.to_bits());
    let diff: Vec<f64> = w.iter().zip(&q_x).map(|(a, b)| a - b).collect();
    let norm_x = norm2(&numerics::matvec(x, &diff)?);
    let norm_svt = norm2(&numerics::matvec(&svt, &diff)?);
    let scale = norm_x.abs().max(norm_svt.abs());
    let relative_norm_diff = if scale == 0.0 { 0.0 } else { (norm_x - norm_svt).abs() / scale };
    Ok(SvdEquivalence {
        rank: factors.rank(),
        q_equal,
        q_x,
        q_svt,
        norm_x,
        norm_svt,
        relative_norm_diff,
        pass: q_equal && relative_norm_diff <= 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{synthetic_data, DataDistribution};
    use crate::operators::OperatorSpec;

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn slack_formula() {
        assert!((binomial_slack(0.5, 100) - 0.15).abs() < 1e-15);
        assert_eq!(binomial_slack(0.0, 10), 0.0);
        assert_eq!(binomial_slack(1.0, 10), 0.0);
    }

    #[test]
    fn theorem_needs_fifty_samples() {
        let inputs = BoundInputs::new(1.0, 1.0, 1.0, 1.0, 1, 2, vec![1.0; 4]).unwrap();
        assert!(matches!(
            verify_theorem(&[0.0; 49], &inputs, None),
            Err(AnalysisError::TooFewTrials { min: 50, got: 49 })
        ));
        assert!(verify_theorem(&[0.0; 50], &inputs, None).unwrap().pass);
    }

    #[test]
    fn identity_theorem_trials_are_zero() {
        let x = synthetic_data(4, 16, DataDistribution::Uniform, 1);
        let cfg = CompressionConfig::new(2.0, OperatorSpec::identity(1.0).unwrap(), 5).unwrap();
        let s = theorem_trials(&x, &cfg, 60, 9).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
        let inputs = BoundInputs::from_data(&x, 1, &cfg.operator, 2.0, 1.0).unwrap();
        let r = verify_theorem(&s, &inputs, Some(&[0.1, 1.0, 10.0])).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn proposition_rejects_zero_trials() {
        let cfg = CompressionConfig::new(4.0, OperatorSpec::onebit(1.0).unwrap(), 1).unwrap();
        let setup = PropositionSetup {
            x: synthetic_data(4, 8, DataDistribution::Uniform, 1),
            n1: 2,
            p: 1.0,
            trials: 0,
            weight_seed: 1,
            activation: Activation::Relu,
        };
        assert!(verify_proposition(&cfg, &setup).is_err());
    }

    #[test]
    fn support_checks() {
        assert!(!support_violation(OperatorKind::OnebitQuantize, 2.0, 1.0));
        assert!(!support_violation(OperatorKind::OnebitQuantize, -2.0, 1.0));
        assert!(support_violation(OperatorKind::OnebitQuantize, 6.0, 1.0));
        assert!(!support_violation(OperatorKind::QuantizePrune, 0.0, 1.0));
        assert!(support_violation(OperatorKind::QuantizePrune, 4.0, 1.0));
        assert!(!support_violation(OperatorKind::Prune, 17.0, 1.0));
    }

    #[test]
    fn rtn_closed_form_and_csv() {
        let mut setup = RtnSetup::new(vec![8, 32], 1.0, 4.0, 3);
        setup.trials = 10;
        let rows = rtn_comparison(&setup).unwrap();
        for r in &rows {
            assert!((r.rtn_error - 1.001 * r.n0 as f64).abs() <= 1e-10 * r.rtn_error);
        }
        let csv = rtn_table_csv(&rows);
        assert!(csv.starts_with("N0,rtn_error,spfc_error,kappa,ratio\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn svd_orthonormal_columns() {
        let x = DenseMatrix::from_fn(6, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let cfg = CompressionConfig::new(3.0, OperatorSpec::onebit(1.0).unwrap(), 8).unwrap();
        let r = svd_equivalence_experiment(&x, &[0.3, -0.7, 0.1], &cfg).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.rank, 3);
    }
}
