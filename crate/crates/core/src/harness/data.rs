//! In-memory labelled datasets and the synthetic two-class generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Two-way split used by every classification task.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
}

fn split_off(all: Dataset, n_train: usize) -> Splits {
    let d = all.dim;
    let (tx, vx) = all.features.split_at(n_train * d);
    let (ty, vy) = all.labels.split_at(n_train);
    Splits {
        train: Dataset {
            features: tx.to_vec(),
            labels: ty.to_vec(),
            dim: d,
            classes: all.classes,
        },
        validation: Dataset {
            features: vx.to_vec(),
            labels: vy.to_vec(),
            dim: d,
            classes: all.classes,
        },
    }
}

/// Fraction of generated points that go to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Two isotropic Gaussian blobs centred at `offset ± (sep/2, 0)` with
/// per-axis standard deviation `std`. Labels alternate so both classes are
/// balanced in either split.
pub fn blobs2(seed: u64, n: usize, sep: f64, std: f64, offset: f64) -> Splits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let cx = offset + if y == 0 { -sep / 2.0 } else { sep / 2.0 };
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        features.push(cx + std * nx);
        features.push(offset + std * ny);
        labels.push(y);
    }
    let all = Dataset {
        features,
        labels,
        dim: 2,
        classes: 2,
    };
    split_off(all, train_len(n))
}

/// Two interleaving half circles with Gaussian noise of standard deviation
/// `noise`. Class 0 is the upper moon centred at the origin, class 1 the
/// lower moon centred at `(1, 0.5)`.
pub fn moons2(seed: u64, n: usize, noise: f64) -> Splits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let angle = std::f64::consts::PI * rng.random::<f64>();
        let (x0, x1) = if y == 0 {
            (angle.cos(), angle.sin())
        } else {
            (1.0 - angle.cos(), 0.5 - angle.sin())
        };
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        features.push(x0 + noise * nx);
        features.push(x1 + noise * ny);
        labels.push(y);
    }
    let all = Dataset {
        features,
        labels,
        dim: 2,
        classes: 2,
    };
    split_off(all, train_len(n))
}

fn train_len(n: usize) -> usize {
    let t = (n as f64 * TRAIN_FRACTION).round() as usize;
    t.clamp(1.min(n), n.saturating_sub(1).max(1.min(n)))
}

/// Deterministic permutation of `0..n` for one epoch, from a counter-based
/// stream keyed by `(seed, epoch)`.
pub fn epoch_permutation(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
