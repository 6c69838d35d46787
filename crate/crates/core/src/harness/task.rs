use std::fmt;

use crate::optim::ParamVector;

use super::data::{epoch_permutation, Dataset, Splits};
use super::mlp::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
        })
    }
}

/// Which examples a loss/gradient evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSelector<'a> {
    Full(Split),
    /// Explicit training-set rows.
    Rows(&'a [usize]),
}

/// Full-split loss and, for classifiers, top-1 accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub top1: Option<f64>,
}

/// A differentiable training problem.
///
/// Implementations are immutable; everything mutable lives in the training
/// loop, so one task can back any number of concurrent trials.
pub trait Task: Send + Sync {
    /// Dataset identifier, e.g. `blobs2(n=2000,seed=7)`.
    fn id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn param_len(&self) -> usize;
    fn init_params(&self, seed: u64) -> ParamVector;
    /// Number of training examples; zero for full-batch tasks without data.
    fn train_size(&self) -> usize;
    fn batch_size(&self) -> usize;
    fn loss_and_grad(&self, theta: &[f64], batch: BatchSelector<'_>) -> (f64, Vec<f64>);
    fn evaluate(&self, theta: &[f64], split: Split) -> Evaluation;

    fn has_accuracy(&self) -> bool {
        false
    }

    /// Mini-batches per epoch; full-batch tasks have one.
    fn batches_per_epoch(&self) -> usize {
        let n = self.train_size();
        if n == 0 {
            1
        } else {
            n.div_ceil(self.batch_size().max(1))
        }
    }

    /// Loss and gradient on batch `index` of `epoch` under the shuffle for `seed`.
    fn batch_loss_and_grad(&self, theta: &[f64], seed: u64, epoch: u64, index: usize) -> (f64, Vec<f64>) {
        let n = self.train_size();
        if n == 0 {
            return self.loss_and_grad(theta, BatchSelector::Full(Split::Train));
        }
        let perm = epoch_permutation(seed, epoch, n);
        let b = self.batch_size().max(1);
        let lo = (index * b).min(n);
        let hi = (lo + b).min(n);
        self.loss_and_grad(theta, BatchSelector::Rows(&perm[lo..hi]))
    }
}

/// Labelled data plus a softmax model.
#[derive(Debug, Clone)]
pub struct ClassificationTask {
    pub(crate) id: String,
    pub(crate) model_id: String,
    pub(crate) model: Mlp,
    pub(crate) data: Splits,
    pub(crate) batch_size: usize,
}

impl ClassificationTask {
    pub fn new(id: impl Into<String>, data: Splits, hidden: Option<usize>, batch_size: usize) -> Self {
        let model = Mlp {
            inputs: data.train.dim,
            hidden,
            classes: data.train.classes,
        };
        ClassificationTask {
            id: id.into(),
            model_id: model.id(),
            model,
            data,
            batch_size,
        }
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn split(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.data.train,
            Split::Validation => &self.data.validation,
        }
    }
}

impl Task for ClassificationTask {
    fn id(&self) -> &str {
        &self.id
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn param_len(&self) -> usize {
        self.model.param_len()
    }

    fn init_params(&self, seed: u64) -> ParamVector {
        ParamVector(self.model.init(seed))
    }

    fn train_size(&self) -> usize {
        self.data.train.len()
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn loss_and_grad(&self, theta: &[f64], batch: BatchSelector<'_>) -> (f64, Vec<f64>) {
        match batch {
            BatchSelector::Full(split) => {
                let data = self.split(split);
                let rows: Vec<usize> = (0..data.len()).collect();
                self.model.loss_and_grad(theta, data, &rows)
            }
            BatchSelector::Rows(rows) => self.model.loss_and_grad(theta, &self.data.train, rows),
        }
    }

    fn evaluate(&self, theta: &[f64], split: Split) -> Evaluation {
        let (loss, acc) = self.model.evaluate(theta, self.split(split));
        Evaluation { loss, top1: Some(acc) }
    }

    fn has_accuracy(&self) -> bool {
        true
    }
}

/// `L(theta) = 0.5 * lambda * |theta|^2`, full batch. Curvature is exactly
/// `lambda` in every direction, which makes it the reference problem for the
/// M-opt estimator.
#[derive(Debug, Clone)]
pub struct QuadraticTask {
    id: String,
    pub lambda: f64,
    pub dim: usize,
}

impl QuadraticTask {
    pub fn new(lambda: f64, dim: usize) -> Self {
        QuadraticTask {
            id: format!("quadratic(dim={dim},lambda={lambda})"),
            lambda,
            dim,
        }
    }
}

impl Task for QuadraticTask {
    fn id(&self) -> &str {
        &self.id
    }

    fn model_id(&self) -> &str {
        "quadratic"
    }

    fn param_len(&self) -> usize {
        self.dim
    }

    /// Entries drawn uniformly from `[-2, -0.5] ∪ [0.5, 2]`.
    fn init_params(&self, seed: u64) -> ParamVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ParamVector(
            (0..self.dim)
                .map(|_| {
                    let mag = rng.random_range(0.5..2.0);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect(),
        )
    }

    fn train_size(&self) -> usize {
        0
    }

    fn batch_size(&self) -> usize {
        1
    }

    fn loss_and_grad(&self, theta: &[f64], _batch: BatchSelector<'_>) -> (f64, Vec<f64>) {
        let loss = 0.5 * self.lambda * theta.iter().map(|v| v * v).sum::<f64>();
        (loss, theta.iter().map(|v| self.lambda * v).collect())
    }

    fn evaluate(&self, theta: &[f64], _split: Split) -> Evaluation {
        Evaluation {
            loss: self.loss_and_grad(theta, BatchSelector::Full(Split::Train)).0,
            top1: None,
        }
    }
}
