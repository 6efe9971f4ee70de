//! Scalar stochastic operators plugged into the per-neuron compressor.
//!
//! Every stochastic kind is unbiased (`E[T(z)] = z`) with a hard deviation
//! bound `|T(z) − z| ≤ M`:
//!
//! | kind             | output                          | M    |
//! |------------------|---------------------------------|------|
//! | `onebit_quantize`| `{(4k+2)K : k ∈ ℤ}`             | `4K` |
//! | `prune`          | `0`, `±U[cK, K)`, or `z`        | `K`  |
//! | `quantize_prune` | `2K·ℤ`                          | `2K` |
//! | `identity`       | `z`                             | `0`  |
//!
//! `rtn_onebit` is the deterministic round-to-nearest baseline on the 1-bit
//! alphabet. It is neither unbiased nor covered by a deviation bound.

mod rng;

pub use rng::{mix_seed, splitmix64, RngStream};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("operator input is not finite: {0}")]
    NonFinite(f64),
    #[error("operator kind {found} used where {expected} is required")]
    WrongKind { expected: OperatorKind, found: OperatorKind },
    #[error("weight bound K must be finite and > 0, got {0}")]
    InvalidBound(f64),
    #[error("pruning threshold c must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("operator kind {0} requires the pruning threshold c")]
    MissingThreshold(OperatorKind),
    #[error("operator kind {0} makes no unbiasedness or deviation claim")]
    UnboundedContract(OperatorKind),
    #[error("unknown operator kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    OnebitQuantize,
    Prune,
    QuantizePrune,
    RtnOnebit,
    Identity,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::OnebitQuantize,
        OperatorKind::Prune,
        OperatorKind::QuantizePrune,
        OperatorKind::RtnOnebit,
        OperatorKind::Identity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::OnebitQuantize => "onebit_quantize",
            OperatorKind::Prune => "prune",
            OperatorKind::QuantizePrune => "quantize_prune",
            OperatorKind::RtnOnebit => "rtn_onebit",
            OperatorKind::Identity => "identity",
        }
    }

    pub fn needs_threshold(self) -> bool {
        matches!(self, OperatorKind::Prune | OperatorKind::QuantizePrune)
    }

    /// Whether outputs live on a discrete alphabet.
    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            OperatorKind::OnebitQuantize | OperatorKind::QuantizePrune | OperatorKind::RtnOnebit
        )
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        match norm.as_str() {
            "onebit_quantize" | "onebit" | "quantize" => Ok(OperatorKind::OnebitQuantize),
            "prune" => Ok(OperatorKind::Prune),
            "quantize_prune" => Ok(OperatorKind::QuantizePrune),
            "rtn_onebit" | "rtn" => Ok(OperatorKind::RtnOnebit),
            "identity" => Ok(OperatorKind::Identity),
            _ => Err(OperatorError::UnknownKind(s.to_string())),
        }
    }
}

/// Operator kind plus its parameters. Always validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperatorSpec")]
pub struct OperatorSpec {
    kind: OperatorKind,
    #[serde(rename = "K")]
    k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

#[derive(Deserialize)]
struct RawOperatorSpec {
    kind: OperatorKind,
    #[serde(rename = "K")]
    k: f64,
    #[serde(default)]
    c: Option<f64>,
}

impl TryFrom<RawOperatorSpec> for OperatorSpec {
    type Error = OperatorError;

    fn try_from(raw: RawOperatorSpec) -> Result<Self, Self::Error> {
        OperatorSpec::new(raw.kind, raw.k, raw.c)
    }
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, k: f64, c: Option<f64>) -> Result<Self, OperatorError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(OperatorError::InvalidBound(k));
        }
        let c = if kind.needs_threshold() {
            let c = c.ok_or(OperatorError::MissingThreshold(kind))?;
            if !(c > 0.0 && c <= 1.0) {
                return Err(OperatorError::InvalidThreshold(c));
            }
            Some(c)
        } else {
            None
        };
        Ok(Self { kind, k, c })
    }

    pub fn onebit(k: f64) -> Result<Self, OperatorError> {
        Self::new(OperatorKind::OnebitQuantize, k, None)
    }

    pub fn prune(k: f64, c: f64) -> Result<Self, OperatorError> {
        Self::new(OperatorKind::Prune, k, Some(c))
    }

    pub fn quantize_prune(k: f64, c: f64) -> Result<Self, OperatorError> {
        Self::new(OperatorKind::QuantizePrune, k, Some(c))
    }

    pub fn rtn(k: f64) -> Result<Self, OperatorError> {
        Self::new(OperatorKind::RtnOnebit, k, None)
    }

    pub fn identity(k: f64) -> Result<Self, OperatorError> {
        Self::new(OperatorKind::Identity, k, None)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Weight bound `K`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Pruning threshold fraction, present only for pruning kinds.
    pub fn c(&self) -> Option<f64> {
        self.c
    }

    fn threshold(&self) -> f64 {
        self.c.expect("validated pruning spec carries c")
    }
}

/// `M` in `|T(z) − z| ≤ M`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DeviationBound(pub f64);

impl DeviationBound {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// An unbiased scalar randomizer with a declared deviation bound.
///
/// The compressor only needs this trait, so custom operators can be plugged in
/// without going through [`OperatorSpec`].
pub trait StochasticOperator {
    fn apply(&self, z: f64, rng: &mut RngStream) -> Result<f64, OperatorError>;

    fn deviation_bound(&self) -> Result<DeviationBound, OperatorError>;

    /// Whether `q` can be produced by this operator.
    fn in_support(&self, q: f64) -> bool;
}

impl StochasticOperator for OperatorSpec {
    fn apply(&self, z: f64, rng: &mut RngStream) -> Result<f64, OperatorError> {
        match self.kind {
            OperatorKind::OnebitQuantize => quantize_onebit(z, self, rng),
            OperatorKind::Prune => prune(z, self, rng),
            OperatorKind::QuantizePrune => quantize_prune(z, self, rng),
            OperatorKind::RtnOnebit => rtn(z, self),
            OperatorKind::Identity => finite(z),
        }
    }

    fn deviation_bound(&self) -> Result<DeviationBound, OperatorError> {
        deviation_bound(self)
    }

    fn in_support(&self, q: f64) -> bool {
        if !q.is_finite() {
            return false;
        }
        match self.kind {
            OperatorKind::OnebitQuantize | OperatorKind::RtnOnebit => on_offset_grid(q, self.k),
            OperatorKind::QuantizePrune => on_grid(q, 2.0 * self.k),
            OperatorKind::Prune => q == 0.0 || q.abs() >= self.threshold() * self.k,
            OperatorKind::Identity => true,
        }
    }
}

/// `q ∈ {(4k+2)K}`.
pub fn on_offset_grid(q: f64, k: f64) -> bool {
    let r = (q / k - 2.0) / 4.0;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

/// `q ∈ step·ℤ`.
pub fn on_grid(q: f64, step: f64) -> bool {
    let r = q / step;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

fn finite(z: f64) -> Result<f64, OperatorError> {
    if z.is_finite() {
        Ok(z)
    } else {
        Err(OperatorError::NonFinite(z))
    }
}

fn expect_kind(spec: &OperatorSpec, expected: OperatorKind) -> Result<(), OperatorError> {
    if spec.kind == expected {
        Ok(())
    } else {
        Err(OperatorError::WrongKind {
            expected,
            found: spec.kind,
        })
    }
}

/// Unbiased two-point rounding onto `step·ℤ`.
fn round_to_grid(y: f64, step: f64, rng: &mut RngStream) -> f64 {
    let r = y / step;
    let lo = r.floor();
    if lo == r {
        return y;
    }
    // P(lower) = ⌈r⌉ − r
    if rng.next_f64() < (lo + 1.0) - r {
        lo * step
    } else {
        (lo + 1.0) * step
    }
}

/// Stochastic 1-bit quantizer onto `{…, −6K, −2K, 2K, 6K, …}`.
///
/// With `d` the largest alphabet element `≤ z` and `u = d + 4K`, returns `d`
/// with probability `(u − z)/4K`, otherwise `u`.
pub fn quantize_onebit(z: f64, spec: &OperatorSpec, rng: &mut RngStream) -> Result<f64, OperatorError> {
    expect_kind(spec, OperatorKind::OnebitQuantize)?;
    let z = finite(z)?;
    let k = spec.k;
    let r = (z - 2.0 * k) / (4.0 * k);
    let lo = r.floor();
    if lo == r {
        return Ok(z);
    }
    let d = (4.0 * lo + 2.0) * k;
    let u = d + 4.0 * k;
    Ok(if rng.next_f64() < (lo + 1.0) - r { d } else { u })
}

/// Stochastic pruner.
///
/// Values with `|z| > cK` pass through. Smaller values become `0` with
/// probability `1 − 2|z|/((c+1)K)` and `sgn(z)·U[cK, K)` otherwise.
pub fn prune(z: f64, spec: &OperatorSpec, rng: &mut RngStream) -> Result<f64, OperatorError> {
    expect_kind(spec, OperatorKind::Prune)?;
    Ok(prune_unchecked(finite(z)?, spec.k, spec.threshold(), rng))
}

fn prune_unchecked(z: f64, k: f64, c: f64, rng: &mut RngStream) -> f64 {
    let cut = c * k;
    if z.abs() > cut {
        return z;
    }
    let keep = 2.0 * z.abs() / ((c + 1.0) * k);
    if rng.next_f64() < keep {
        let mag = cut + (k - cut) * rng.next_f64();
        mag.copysign(z)
    } else {
        0.0
    }
}

/// Pruner followed by unbiased rounding onto `2K·ℤ`.
pub fn quantize_prune(z: f64, spec: &OperatorSpec, rng: &mut RngStream) -> Result<f64, OperatorError> {
    expect_kind(spec, OperatorKind::QuantizePrune)?;
    let y = prune_unchecked(finite(z)?, spec.k, spec.threshold(), rng);
    Ok(round_to_grid(y, 2.0 * spec.k, rng))
}

/// Round-to-nearest onto `{(4k+2)K}`; midpoints `4kK` go up.
pub fn rtn(z: f64, spec: &OperatorSpec) -> Result<f64, OperatorError> {
    expect_kind(spec, OperatorKind::RtnOnebit)?;
    let z = finite(z)?;
    let k = spec.k;
    let idx = ((z - 2.0 * k) / (4.0 * k) + 0.5).floor();
    Ok((4.0 * idx + 2.0) * k)
}

pub fn deviation_bound(spec: &OperatorSpec) -> Result<DeviationBound, OperatorError> {
    let k = spec.k;
    match spec.kind {
        OperatorKind::OnebitQuantize => Ok(DeviationBound(4.0 * k)),
        OperatorKind::Prune => Ok(DeviationBound(k)),
        OperatorKind::QuantizePrune => Ok(DeviationBound(2.0 * k)),
        OperatorKind::Identity => Ok(DeviationBound(0.0)),
        OperatorKind::RtnOnebit => Err(OperatorError::UnboundedContract(spec.kind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn freq(n: usize, mut f: impl FnMut() -> bool) -> f64 {
        (0..n).filter(|_| f()).count() as f64 / n as f64
    }

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn onebit_alphabet_point_is_fixed() {
        let spec = OperatorSpec::onebit(1.0).unwrap();
        let mut rng = RngStream::derive(0, 0, 0);
        for _ in 0..100 {
            assert_eq!(quantize_onebit(2.0, &spec, &mut rng).unwrap(), 2.0);
            assert_eq!(quantize_onebit(-6.0, &spec, &mut rng).unwrap(), -6.0);
        }
    }

    #[test]
    fn onebit_zero_is_a_fair_coin() {
        let spec = OperatorSpec::onebit(1.0).unwrap();
        let mut rng = RngStream::derive(1, 0, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let q = quantize_onebit(0.0, &spec, &mut rng).unwrap();
            assert!(q == 2.0 || q == -2.0);
            sum += q;
        }
        assert!((sum / n as f64).abs() < 0.01);
    }

    #[test]
    fn onebit_one_rounds_down_a_quarter_of_the_time() {
        let spec = OperatorSpec::onebit(1.0).unwrap();
        let mut rng = RngStream::derive(2, 0, 0);
        let n = 200_000;
        let p = freq(n, || quantize_onebit(1.0, &spec, &mut rng).unwrap() == -2.0);
        assert!((p - 0.25).abs() <= three_sigma(0.25, n), "{p}");
    }

    #[test]
    fn prune_passes_large_values() {
        let spec = OperatorSpec::prune(1.0, 0.5).unwrap();
        let mut rng = RngStream::derive(3, 0, 0);
        assert_eq!(prune(0.8, &spec, &mut rng).unwrap(), 0.8);
        assert_eq!(prune(-0.8, &spec, &mut rng).unwrap(), -0.8);
        for _ in 0..1000 {
            assert_eq!(prune(0.0, &spec, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn prune_small_value_statistics() {
        let spec = OperatorSpec::prune(1.0, 0.5).unwrap();
        let mut rng = RngStream::derive(4, 0, 0);
        let n = 1_000_000;
        let (mut nonzero, mut sum) = (0usize, 0.0);
        for _ in 0..n {
            let q = prune(0.3, &spec, &mut rng).unwrap();
            if q != 0.0 {
                assert!((0.5..=1.0).contains(&q), "{q}");
                nonzero += 1;
            }
            sum += q;
        }
        let p = nonzero as f64 / n as f64;
        assert!((p - 0.4).abs() <= three_sigma(0.4, n), "{p}");
        assert!((sum / n as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn quantize_prune_grid_point_is_fixed() {
        let spec = OperatorSpec::quantize_prune(1.0, 0.5).unwrap();
        let mut rng = RngStream::derive(5, 0, 0);
        for _ in 0..100 {
            assert_eq!(quantize_prune(2.0, &spec, &mut rng).unwrap(), 2.0);
        }
    }

    #[test]
    fn quantize_prune_small_value_support_and_frequency() {
        let spec = OperatorSpec::quantize_prune(1.0, 0.5).unwrap();
        let mut rng = RngStream::derive(6, 0, 0);
        let n = 1_000_000;
        let mut twos = 0usize;
        for _ in 0..n {
            let q = quantize_prune(0.3, &spec, &mut rng).unwrap();
            assert!(q == 0.0 || q == 2.0, "{q}");
            twos += (q == 2.0) as usize;
        }
        let p = twos as f64 / n as f64;
        assert!((p - 0.15).abs() <= three_sigma(0.15, n), "{p}");
        let mut sum = 0.0;
        for _ in 0..n {
            sum += quantize_prune(0.0, &spec, &mut rng).unwrap();
        }
        assert!((sum / n as f64).abs() < 0.01);
    }

    #[test]
    fn rtn_nearest_with_upward_ties() {
        let spec = OperatorSpec::rtn(1.0).unwrap();
        assert_eq!(rtn(0.9, &spec).unwrap(), 2.0);
        assert_eq!(rtn(-0.9, &spec).unwrap(), -2.0);
        assert_eq!(rtn(0.0, &spec).unwrap(), 2.0);
        assert_eq!(rtn(4.0, &spec).unwrap(), 6.0);
        assert_eq!(rtn(3.9, &spec).unwrap(), 2.0);
    }

    #[test]
    fn deviation_bounds() {
        assert_eq!(deviation_bound(&OperatorSpec::onebit(1.0).unwrap()).unwrap().value(), 4.0);
        assert_eq!(deviation_bound(&OperatorSpec::prune(1.0, 0.5).unwrap()).unwrap().value(), 1.0);
        assert_eq!(deviation_bound(&OperatorSpec::quantize_prune(1.0, 0.5).unwrap()).unwrap().value(), 2.0);
        assert_eq!(deviation_bound(&OperatorSpec::identity(1.0).unwrap()).unwrap().value(), 0.0);
        assert!(matches!(
            deviation_bound(&OperatorSpec::rtn(1.0).unwrap()),
            Err(OperatorError::UnboundedContract(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(OperatorSpec::onebit(0.0).is_err());
        assert!(OperatorSpec::prune(1.0, 1.5).is_err());
        assert!(OperatorSpec::prune(1.0, 0.0).is_err());
        assert!(OperatorSpec::prune(1.0, 1.0).is_ok());
        assert_eq!(
            OperatorSpec::new(OperatorKind::Prune, 1.0, None),
            Err(OperatorError::MissingThreshold(OperatorKind::Prune))
        );
    }

    #[test]
    fn wrong_kind_and_non_finite_rejected() {
        let mut rng = RngStream::derive(0, 0, 0);
        let q = OperatorSpec::onebit(1.0).unwrap();
        assert!(matches!(prune(0.1, &q, &mut rng), Err(OperatorError::WrongKind { .. })));
        assert_eq!(quantize_onebit(f64::NAN, &q, &mut rng).unwrap_err().to_string(), "operator input is not finite: NaN");
        assert!(q.apply(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn spec_json_round_trip_and_validation() {
        let spec = OperatorSpec::prune(1.0, 0.5).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"prune","K":1.0,"c":0.5}"#);
        assert_eq!(serde_json::from_str::<OperatorSpec>(&json).unwrap(), spec);
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"prune","K":1.0,"c":2.0}"#).is_err());
        assert_eq!(
            serde_json::to_string(&OperatorSpec::onebit(2.0).unwrap()).unwrap(),
            r#"{"kind":"onebit_quantize","K":2.0}"#
        );
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("quantize-prune".parse::<OperatorKind>().unwrap(), OperatorKind::QuantizePrune);
        assert_eq!("onebit".parse::<OperatorKind>().unwrap(), OperatorKind::OnebitQuantize);
        assert!("bogus".parse::<OperatorKind>().is_err());
    }

    fn stochastic_specs(k: f64) -> Vec<OperatorSpec> {
        vec![
            OperatorSpec::onebit(k).unwrap(),
            OperatorSpec::prune(k, 0.5).unwrap(),
            OperatorSpec::quantize_prune(k, 0.5).unwrap(),
            OperatorSpec::identity(k).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn bounded_deviation_and_support(z in -10.0f64..10.0, k in 0.1f64..3.0, seed in any::<u64>()) {
            for spec in stochastic_specs(k) {
                let mut rng = RngStream::from_key(seed);
                let m = spec.deviation_bound().unwrap().value();
                let q = spec.apply(z, &mut rng).unwrap();
                prop_assert!((q - z).abs() <= m * (1.0 + 1e-12), "{:?} z={} q={}", spec.kind(), z, q);
                prop_assert!(spec.in_support(q) || (spec.kind() == OperatorKind::Prune && q == z));
            }
        }

        #[test]
        fn deterministic_given_stream(z in -5.0f64..5.0, seed in any::<u64>()) {
            for spec in stochastic_specs(1.0) {
                let a = spec.apply(z, &mut RngStream::from_key(seed)).unwrap();
                let b = spec.apply(z, &mut RngStream::from_key(seed)).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
