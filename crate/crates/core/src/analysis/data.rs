//! Synthetic input data.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::DenseMatrix;
use crate::operators::RngStream;

/// Stream index reserved for data so it never collides with weight or operator streams.
const DATA_STREAM: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataDistribution {
    /// i.i.d. uniform on `(−1, 1)`.
    #[default]
    Uniform,
    /// i.i.d. standard normal.
    Gaussian,
}

impl fmt::Display for DataDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Gaussian => "gaussian",
        })
    }
}

impl FromStr for DataDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            other => Err(format!("unknown distribution '{other}' (expected uniform or gaussian)")),
        }
    }
}

/// An `m × n` data matrix that depends only on `(seed, m, n, dist)`.
pub fn synthetic_data(m: usize, n: usize, dist: DataDistribution, seed: u64) -> DenseMatrix {
    let mut rng = RngStream::derive(seed, DATA_STREAM, n);
    match dist {
        DataDistribution::Uniform => DenseMatrix::from_fn(m, n, |_, _| 2.0 * rng.next_f64() - 1.0),
        DataDistribution::Gaussian => DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng)),
    }
}
