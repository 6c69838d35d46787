//! Policy verification against a target accuracy, and the M-opt
//! learning-rate estimate.

mod mopt;
mod verify;

use thiserror::Error;

use crate::db::DbError;
use crate::harness::HarnessError;
use crate::tuner::TunerError;

pub use mopt::{m_opt_lr, m_opt_trace, mopt_csv, MOptEstimate};
pub use verify::{verify_policy, Decision, Verdict, VerifyConfig};

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("snapshot lengths differ: {0}, {1} and {2}")]
    LengthMismatch(usize, usize, usize),
    #[error("applied learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("budget {budget} is shorter than three snapshot strides of {stride}")]
    BudgetTooShort { budget: u64, stride: u64 },
    #[error("snapshot stride must be at least 1")]
    ZeroStride,
    #[error("the trial diverged at iteration {0} before three snapshots were taken")]
    Diverged(u64),
    #[error("no learning rate recorded for iteration {0}")]
    MissingLr(u64),
    #[error("the fallback search produced no candidates")]
    EmptyGrid,
    #[error("invalid verification configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Db(#[from] DbError),
}
