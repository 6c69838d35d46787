//! Deterministic desk-scale training tasks and the training loop.

mod data;
pub mod idx;
mod landscape;
mod mlp;
mod spec;
mod task;
mod train;

use thiserror::Error;

pub use data::{blobs2, epoch_permutation, moons2, Dataset, Splits, TRAIN_FRACTION};
pub use landscape::{Landscape2d, Pit};
pub use mlp::Mlp;
pub use spec::{load_mnist_split, load_task, mnist_dataset, parse_task_spec, TaskSpec, DEFAULT_BATCH};
pub use task::{BatchSelector, ClassificationTask, Evaluation, QuadraticTask, Split, Task};
pub use train::{
    evaluate, train, LrController, Metrics, Schedule, SwitchEvent, TrainConfig, TrialRecord, DIVERGENCE_LOSS,
};

use crate::optim::OptimError;
use crate::schedule::ScheduleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("bad task spec {0}")]
    BadTaskSpec(String),
    #[error("task {task}: bad parameter {param}={value}")]
    BadParam { task: String, param: String, value: String },
    #[error(transparent)]
    Idx(#[from] idx::IdxError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}
