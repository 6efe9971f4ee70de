//! Closed-form error radii and failure probabilities for one compressed layer.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::numerics::{self, column_norms, DenseMatrix};
use crate::operators::{OperatorKind, OperatorSpec, StochasticOperator};

/// Everything the bounds depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Scaling constant `C ≥ 1`.
    #[serde(rename = "C")]
    pub scale: f64,
    /// Operator deviation bound `M`.
    #[serde(rename = "M")]
    pub deviation: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// Probability exponent `p ≥ 1`.
    pub p: f64,
    pub n0: usize,
    pub n1: usize,
    pub m: usize,
    /// `‖X_t‖` for `t = 1..N₀` (stored 0-based).
    pub column_norms: Vec<f64>,
}

impl BoundInputs {
    pub fn new(
        scale: f64,
        deviation: f64,
        k: f64,
        p: f64,
        n1: usize,
        m: usize,
        column_norms: Vec<f64>,
    ) -> Result<Self, AnalysisError> {
        let inputs = Self {
            scale,
            deviation,
            k,
            p,
            n0: column_norms.len(),
            n1,
            m,
            column_norms,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Inputs for compressing an `N₀ × n1` layer against data `x` with `op`.
    pub fn from_data(x: &DenseMatrix, n1: usize, op: &OperatorSpec, scale: f64, p: f64) -> Result<Self, AnalysisError> {
        let m_dev = op.deviation_bound()?.value();
        Self::new(scale, m_dev, op.k(), p, n1, x.rows(), column_norms(x))
    }

    /// Like [`BoundInputs::from_data`] when only `m` and the column norms are known.
    pub fn from_norms(
        norms: Vec<f64>,
        m: usize,
        n1: usize,
        op: &OperatorSpec,
        scale: f64,
        p: f64,
    ) -> Result<Self, AnalysisError> {
        let m_dev = op.deviation_bound()?.value();
        Self::new(scale, m_dev, op.k(), p, n1, m, norms)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |what: &str, v: f64| Err(AnalysisError::InvalidInput(format!("{what} = {v}")));
        if !(self.scale.is_finite() && self.scale >= 1.0) {
            return bad("C (must be >= 1)", self.scale);
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return bad("p (must be >= 1)", self.p);
        }
        if !(self.deviation.is_finite() && self.deviation >= 0.0) {
            return bad("M (must be >= 0)", self.deviation);
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return bad("K (must be > 0)", self.k);
        }
        if let Some(&v) = self.column_norms.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return bad("column norm", v);
        }
        if self.n0 != self.column_norms.len() {
            return Err(AnalysisError::InvalidInput(format!(
                "n0 = {} but {} column norms",
                self.n0,
                self.column_norms.len()
            )));
        }
        Ok(())
    }

    /// `max_{1≤i≤N₀} ‖X_i‖`.
    pub fn max_column_norm(&self) -> f64 {
        self.column_norms.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// `β_t = (CπM²/2)·max_{i≤t} ‖X_i‖²` for `t = 0..N₀`, with `β_0 = 0`.
pub fn beta_sequence(inputs: &BoundInputs) -> Vec<f64> {
    let factor = inputs.scale * PI * inputs.deviation * inputs.deviation / 2.0;
    let mut out = Vec::with_capacity(inputs.n0 + 1);
    out.push(0.0);
    let mut running = 0.0_f64;
    for &norm in &inputs.column_norms {
        running = running.max(norm * norm);
        out.push(factor * running);
    }
    out
}

/// Covariance majorants `Σ_0 = 0, Σ_1, …, Σ_{t_max}` where
/// `Σ_t = (I − P_t/C) Σ_{t−1} (I − P_t/C) + (πM²/2) X_t X_tᵀ` and `P_t` projects
/// onto `span(X_t)`.
pub fn sigma_recursion(x: &DenseMatrix, scale: f64, deviation: f64, t_max: usize) -> Result<Vec<DenseMatrix>, AnalysisError> {
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(AnalysisError::InvalidInput(format!("C (must be >= 1) = {scale}")));
    }
    if t_max > x.cols() {
        return Err(AnalysisError::InvalidInput(format!(
            "t_max = {t_max} exceeds {} columns",
            x.cols()
        )));
    }
    let m = x.rows();
    let noise = PI * deviation * deviation / 2.0;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(DenseMatrix::zeros(m, m));
    for t in 0..t_max {
        let xt = x.column(t)?;
        let sq = numerics::dot(&xt, &xt)?;
        if sq == 0.0 {
            return Err(AnalysisError::ZeroColumn { step: t + 1 });
        }
        let contraction = DenseMatrix::from_fn(m, m, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - xt[i] * xt[j] / (sq * scale)
        });
        let prev = out.last().unwrap();
        let core = numerics::matmul(&numerics::matmul(&contraction, prev)?, &contraction)?;
        let next = DenseMatrix::from_fn(m, m, |i, j| {
            let a = core[(i, j)] + noise * xt[i] * xt[j];
            let b = core[(j, i)] + noise * xt[j] * xt[i];
            0.5 * (a + b)
        });
        out.push(next);
    }
    Ok(out)
}

/// `‖·‖` radius for the max entrywise layer error.
///
/// | kind            | κ                                    |
/// |-----------------|--------------------------------------|
/// | onebit_quantize | `4K √(2πCp log N₀) · max‖X_i‖`       |
/// | prune           | `K √(2Cπp log N₀) · max‖X_i‖`        |
/// | quantize_prune  | `2K √(2πCp log N₀) · max‖X_i‖`       |
pub fn kappa(inputs: &BoundInputs, kind: OperatorKind) -> Result<f64, AnalysisError> {
    if inputs.n0 < 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "kappa needs N0 >= 2 (log N0 > 0), got {}",
            inputs.n0
        )));
    }
    let k = inputs.k;
    let log_n0 = (inputs.n0 as f64).ln();
    let (c, p) = (inputs.scale, inputs.p);
    let max_norm = inputs.max_column_norm();
    let radius = match kind {
        OperatorKind::OnebitQuantize => 4.0 * k * (2.0 * PI * c * p * log_n0).sqrt(),
        OperatorKind::Prune => k * (2.0 * c * PI * p * log_n0).sqrt(),
        OperatorKind::QuantizePrune => 2.0 * k * (2.0 * PI * c * p * log_n0).sqrt(),
        other => return Err(AnalysisError::NoBound(other)),
    };
    Ok(radius * max_norm)
}

/// Unclamped failure mass. Values `≥ 1` mean the bound says nothing at this scale.
///
/// The common term is `√2·m·N₁·N₀^{−p}`. The quantizing kinds add
/// `N₁ Σ_{t=2}^{N₀} √2 exp(−C‖X_t‖² / (D·max_{i<t}‖X_i‖²))` with `D = 32π`
/// (onebit) or `D = 8π` (quantize_prune). The `t = 1` term is omitted since
/// `u_0 = 0` makes that event impossible.
pub fn failure_mass(inputs: &BoundInputs, kind: OperatorKind) -> Result<f64, AnalysisError> {
    let n0 = inputs.n0 as f64;
    let base = SQRT_2 * inputs.m as f64 * inputs.n1 as f64 * n0.powf(-inputs.p);
    let divisor = match kind {
        OperatorKind::OnebitQuantize => 32.0 * PI,
        OperatorKind::QuantizePrune => 8.0 * PI,
        OperatorKind::Prune => return Ok(base),
        other => return Err(AnalysisError::NoBound(other)),
    };
    let mut sum = 0.0;
    let mut prev_max_sq = 0.0_f64;
    for (t, &norm) in inputs.column_norms.iter().enumerate() {
        let sq = norm * norm;
        if t > 0 {
            // All earlier columns zero ⇒ u_{t−1} = 0, event impossible.
            if prev_max_sq > 0.0 {
                sum += SQRT_2 * (-inputs.scale * sq / (divisor * prev_max_sq)).exp();
            }
        }
        prev_max_sq = prev_max_sq.max(sq);
    }
    Ok(inputs.n1 as f64 * sum + base)
}

/// [`failure_mass`] clamped to `[0, 1]`.
pub fn failure_probability(inputs: &BoundInputs, kind: OperatorKind) -> Result<f64, AnalysisError> {
    Ok(failure_mass(inputs, kind)?.clamp(0.0, 1.0))
}

/// Tail mass bound `min(1, √2·n·exp(−α²/(4σ²)))` for `P(‖Z‖_∞ > α)` when `Z`
/// is dominated in convex order by `N(0, σ²I_n)`.
pub fn gaussian_tail(alpha: f64, sigma2: f64, n: usize) -> f64 {
    if sigma2 <= 0.0 {
        return if alpha > 0.0 { 0.0 } else { 1.0 };
    }
    (SQRT_2 * n as f64 * (-alpha * alpha / (4.0 * sigma2)).exp()).min(1.0)
}

/// The `α` at which [`gaussian_tail`] equals `γ`: `2σ√(log(√2 n/γ))`.
pub fn gaussian_tail_radius(gamma: f64, sigma2: f64, n: usize) -> f64 {
    2.0 * sigma2.sqrt() * (SQRT_2 * n as f64 / gamma).ln().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(c: f64, m_dev: f64, norms: Vec<f64>) -> BoundInputs {
        BoundInputs::new(c, m_dev, 1.0, 1.0, 1, 1, norms).unwrap()
    }

    #[test]
    fn beta_unit_columns() {
        let b = beta_sequence(&inputs(1.0, 1.0, vec![1.0; 5]));
        assert_eq!(b[0], 0.0);
        for &x in &b[1..] {
            assert!((x - PI / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn beta_homogeneity_and_monotonicity() {
        let norms = vec![0.5, 1.5, 1.0, 2.0, 0.1];
        let b1 = beta_sequence(&inputs(1.0, 1.0, norms.clone()));
        let b2 = beta_sequence(&inputs(1.0, 2.0, norms.clone()));
        let b3 = beta_sequence(&inputs(3.0, 1.0, norms));
        for t in 0..b1.len() {
            assert!((b2[t] - 4.0 * b1[t]).abs() <= 1e-12 * b2[t].max(1.0));
            assert!((b3[t] - 3.0 * b1[t]).abs() <= 1e-12 * b3[t].max(1.0));
        }
        assert!(b1.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sigma_first_step_and_scalar_case() {
        let x = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 0.5, -1.0, 0.0, 3.0]).unwrap();
        let s = sigma_recursion(&x, 2.0, 1.5, 3).unwrap();
        let noise = PI * 1.5 * 1.5 / 2.0;
        let x1 = [1.0, -1.0];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[1][(i, j)] - noise * x1[i] * x1[j]).abs() < 1e-14);
            }
        }
        let ones = DenseMatrix::from_vec(1, 6, vec![1.0; 6]).unwrap();
        let s = sigma_recursion(&ones, 1.0, 2.0, 6).unwrap();
        for st in &s[1..] {
            assert!((st[(0, 0)] - 2.0 * PI).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_zero_column_is_an_error() {
        let x = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(sigma_recursion(&x, 1.0, 1.0, 2), Err(AnalysisError::ZeroColumn { step: 2 })));
    }

    #[test]
    fn kappa_prune_value_and_ratios() {
        let inp = BoundInputs::new(1.0, 1.0, 1.0, 1.0, 1, 1, vec![1.0; 16]).unwrap();
        let kp = kappa(&inp, OperatorKind::Prune).unwrap();
        assert!((kp - (2.0 * PI * 16f64.ln()).sqrt()).abs() < 1e-12);
        assert!((kp - 4.1732).abs() < 1e-3);
        let kq = kappa(&inp, OperatorKind::OnebitQuantize).unwrap();
        assert!((kq / kp - 4.0).abs() < 1e-12);
        let kqp = kappa(&inp, OperatorKind::QuantizePrune).unwrap();
        assert!((kqp / kp - 2.0).abs() < 1e-12);

        let mut inp4 = inp.clone();
        inp4.scale = 4.0;
        for kind in [OperatorKind::OnebitQuantize, OperatorKind::Prune, OperatorKind::QuantizePrune] {
            let r = kappa(&inp4, kind).unwrap() / kappa(&inp, kind).unwrap();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_requires_two_columns() {
        let inp = BoundInputs::new(1.0, 1.0, 1.0, 1.0, 1, 1, vec![1.0]).unwrap();
        assert!(kappa(&inp, OperatorKind::Prune).is_err());
        let inp = BoundInputs::new(1.0, 1.0, 1.0, 1.0, 1, 1, vec![1.0; 4]).unwrap();
        assert!(matches!(kappa(&inp, OperatorKind::RtnOnebit), Err(AnalysisError::NoBound(_))));
    }

    #[test]
    fn prune_failure_value() {
        let inp = BoundInputs::new(1.0, 1.0, 1.0, 2.0, 16, 32, vec![1.0; 256]).unwrap();
        let f = failure_probability(&inp, OperatorKind::Prune).unwrap();
        let expected = SQRT_2 * 32.0 * 16.0 / 65536.0;
        assert!((f - expected).abs() < 1e-15);
        assert!((f - 0.01105).abs() < 1e-5);
    }

    #[test]
    fn onebit_exponential_sum_vanishes_for_large_c() {
        let mut inp = BoundInputs::new(1.0, 4.0, 1.0, 2.0, 16, 32, vec![1.0; 256]).unwrap();
        let base = failure_mass(&inp, OperatorKind::Prune).unwrap();
        inp.scale = 1e6;
        let f = failure_mass(&inp, OperatorKind::OnebitQuantize).unwrap();
        assert!((f - base).abs() < 1e-12);
        inp.scale = 9.0;
        assert!(failure_mass(&inp, OperatorKind::OnebitQuantize).unwrap() > 1.0);
        assert_eq!(failure_probability(&inp, OperatorKind::OnebitQuantize).unwrap(), 1.0);
    }

    #[test]
    fn failure_mass_exponential_terms_start_at_two() {
        // One term per t ≥ 2, each √2·exp(−C/(32π)) with unit norms.
        let inp = BoundInputs::new(5.0, 4.0, 1.0, 1.0, 1, 1, vec![1.0; 3]).unwrap();
        let f = failure_mass(&inp, OperatorKind::OnebitQuantize).unwrap();
        let expected = 2.0 * SQRT_2 * (-5.0 / (32.0 * PI)).exp() + SQRT_2 / 3.0;
        assert!((f - expected).abs() < 1e-14);
        let f8 = failure_mass(&inp, OperatorKind::QuantizePrune).unwrap();
        let expected8 = 2.0 * SQRT_2 * (-5.0 / (8.0 * PI)).exp() + SQRT_2 / 3.0;
        assert!((f8 - expected8).abs() < 1e-14);
    }

    #[test]
    fn failure_mass_nonincreasing_in_p() {
        let mut prev = f64::INFINITY;
        for p in [1.0, 1.5, 2.0, 3.0, 5.0] {
            let inp = BoundInputs::new(20.0, 4.0, 1.0, p, 4, 8, vec![1.0; 64]).unwrap();
            let f = failure_mass(&inp, OperatorKind::OnebitQuantize).unwrap();
            assert!(f <= prev);
            prev = f;
        }
    }

    #[test]
    fn gaussian_tail_values() {
        assert_eq!(gaussian_tail(0.0, 1.0, 3), 1.0);
        let v = gaussian_tail(10.0, 1.0, 1);
        assert!((v - SQRT_2 * (-25.0f64).exp()).abs() < 1e-24);
        assert!((v - 1.96e-11).abs() < 1e-13);
        for (gamma, s2, n) in [(0.5, 2.0, 4), (0.01, 0.3, 16), (1e-6, 5.0, 100)] {
            let alpha = gaussian_tail_radius(gamma, s2, n);
            assert!((gaussian_tail(alpha, s2, n) - gamma).abs() <= 1e-12 * gamma.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(BoundInputs::new(0.5, 1.0, 1.0, 1.0, 1, 1, vec![1.0]).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 1.0, 0.5, 1, 1, vec![1.0]).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 1.0, 1.0, 1, 1, vec![-1.0]).is_err());
    }
}
