//! Error-bound calculators, the covariance-majorant recursion and Monte Carlo
//! validators for the single-layer guarantees.

mod bounds;
mod data;
mod experiments;

pub use bounds::{
    beta_sequence, failure_mass, failure_probability, gaussian_tail, gaussian_tail_radius, kappa, sigma_recursion,
    BoundInputs,
};
pub use data::{synthetic_data, DataDistribution};
pub use experiments::{
    binomial_slack, default_alpha_grid, median, rtn_comparison, rtn_table_csv, svd_equivalence_experiment,
    svd_equivalence_with_streams, theorem_trials, verify_proposition, verify_theorem, AlphaCheck, BoundReport,
    EmpiricalCounts, PropositionSetup, RtnRow, RtnSetup, SvdEquivalence, TheoremReport, Verdict, DEFAULT_GAMMAS,
    MIN_THEOREM_TRIALS,
};

use thiserror::Error;

use crate::compressor::CompressError;
use crate::network::NetworkError;
use crate::numerics::NumericsError;
use crate::operators::{OperatorError, OperatorKind};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid bound input: {0}")]
    InvalidInput(String),
    #[error("column {step} of X is zero; the projection onto it is undefined")]
    ZeroColumn { step: usize },
    #[error("no error bound is defined for operator kind {0}")]
    NoBound(OperatorKind),
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
