//! Policy selection: range test, grid/random search, plateau-driven
//! composition, ranking and cost-to-target analysis.

mod compose;
mod plateau;
mod range;
mod rank;
mod search;
mod tune;

use thiserror::Error;

use crate::harness::HarnessError;
use crate::schedule::ScheduleError;

pub use compose::{compose_staged_policy, Stage};
pub use plateau::{
    change_lr_on_plateau, check_ordering, is_trapped_on_plateau_action, Action, Monitored, PlateauConfig,
    PlateauController, ORDERING_SAMPLES,
};
pub use range::{lr_range_test, LrGrid, RangeTestConfig, RangeTestResult, DELTA_LOWER, DELTA_UPPER};
pub use rank::{iterations_to_target, rank_aggregated, rank_policies, PolicyScore, RankMetric, Ranked, Score};
pub use search::{grid_search, random_search, run_candidates, PolicyTemplate, SearchConfig, SearchSpace};
pub use tune::{tune, Strategy, TuneConfig, TuningReport, DEFAULT_TOP_K};

#[derive(Debug, Error)]
pub enum TunerError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("start index {index} is outside the {n} candidate policies")]
    InvalidStartIndex { index: usize, n: usize },
    #[error("candidates {upper} and {lower} are out of order at t={t}: {upper_lr} < {lower_lr}")]
    OrderingViolation {
        upper: usize,
        lower: usize,
        t: u64,
        upper_lr: f64,
        lower_lr: f64,
    },
    #[error("no candidate policies")]
    EmptyCandidates,
    #[error("bad learning-rate grid: {0}")]
    BadGrid(String),
    #[error("every range-test trial diverged")]
    AllDiverged,
    #[error("task {0} does not report accuracy")]
    NoAccuracy(String),
    #[error("invalid tuner configuration: {0}")]
    InvalidConfig(String),
}

/// Maps `f` over `jobs` on a pool of `workers` threads; results keep the
/// order of `jobs`.
pub(crate) fn par_map<T, R, F>(workers: usize, jobs: Vec<T>, f: F) -> Result<Vec<R>, TunerError>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    use rayon::prelude::*;
    if workers == 0 {
        return Err(TunerError::InvalidConfig("workers must be at least 1".into()));
    }
    if workers == 1 {
        return Ok(jobs.into_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| TunerError::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| jobs.into_par_iter().map(f).collect()))
}
