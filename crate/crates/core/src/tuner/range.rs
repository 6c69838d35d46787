use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::harness::{train, Schedule, Task, TrainConfig};
use crate::optim::OptimizerConfig;
use crate::schedule::LrPolicy;

use super::{par_map, TunerError};

/// Accuracy drop from the peak tolerated at the upper bound.
pub const DELTA_UPPER: f64 = 0.02;
/// Accuracy drop from the peak tolerated at the lower bound.
pub const DELTA_LOWER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub log_spaced: bool,
}

impl LrGrid {
    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        LrGrid {
            lo,
            hi,
            points,
            log_spaced: true,
        }
    }

    /// Grid values in increasing order, with both end points exact.
    pub fn values(&self) -> Result<Vec<f64>, TunerError> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite()) {
            return Err(TunerError::BadGrid(format!(
                "need 0 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.points < 2 {
            return Err(TunerError::BadGrid("at least two points are required".into()));
        }
        let last = (self.points - 1) as f64;
        let mut v: Vec<f64> = (0..self.points)
            .map(|i| {
                let f = i as f64 / last;
                if self.log_spaced {
                    (self.lo.ln() + f * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + f * (self.hi - self.lo)
                }
            })
            .collect();
        v[0] = self.lo;
        v[self.points - 1] = self.hi;
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeTestConfig {
    pub grid: LrGrid,
    /// Training lengths in epochs.
    pub budgets: Vec<u64>,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeTestResult {
    pub lr_grid: Vec<f64>,
    pub budgets: Vec<u64>,
    /// `acc[i][j]`: final top-1 of FIX `lr_grid[i]` after `budgets[j]` epochs;
    /// diverged trials count as 0.
    pub acc: Vec<Vec<f64>>,
    /// `(lr_min, lr_max)`.
    pub recommended: (f64, f64),
}

impl RangeTestResult {
    /// Column of the largest budget, on which the recommendation is based.
    pub fn decisive_column(&self) -> usize {
        let mut best = 0;
        for (j, &b) in self.budgets.iter().enumerate() {
            if b > self.budgets[best] {
                best = j;
            }
        }
        best
    }

    /// Grid rate with the highest accuracy under the largest budget; the
    /// smallest such rate on ties.
    pub fn argmax_lr(&self) -> f64 {
        let j = self.decisive_column();
        let mut best = 0;
        for i in 0..self.lr_grid.len() {
            if self.acc[i][j] > self.acc[best][j] {
                best = i;
            }
        }
        self.lr_grid[best]
    }

    pub fn width_decades(&self) -> f64 {
        (self.recommended.1 / self.recommended.0).log10()
    }

    /// Fraction of the linear interval `[lo, hi]` excluded by the recommendation.
    pub fn volume_reduction(&self, lo: f64, hi: f64) -> f64 {
        1.0 - (self.recommended.1 - self.recommended.0) / (hi - lo)
    }

    /// `lr,budget_epochs,top1`, grid-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lr,budget_epochs,top1\n");
        for (i, lr) in self.lr_grid.iter().enumerate() {
            for (j, b) in self.budgets.iter().enumerate() {
                let _ = writeln!(out, "{lr},{b},{}", self.acc[i][j]);
            }
        }
        out
    }
}

/// Recommends `(lr_min, lr_max)` from one accuracy column: `lr_max` is the
/// largest rate within [`DELTA_UPPER`] of the peak, `lr_min` the smallest
/// within [`DELTA_LOWER`]. When both land on the same rate the interval is
/// widened to the geometric midpoints with its neighbours.
fn recommend(grid: &[f64], acc: &[f64]) -> (f64, f64) {
    let peak = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = (0..grid.len()).rev().find(|&i| acc[i] >= peak - DELTA_UPPER).unwrap_or(0);
    let lo = (0..grid.len()).find(|&i| acc[i] >= peak - DELTA_LOWER).unwrap_or(0);
    if lo < hi {
        return (grid[lo], grid[hi]);
    }
    let i = lo;
    let below = if i > 0 { (grid[i - 1] * grid[i]).sqrt() } else { grid[i] };
    let above = if i + 1 < grid.len() { (grid[i] * grid[i + 1]).sqrt() } else { grid[i] };
    (below, above)
}

/// Trains one FIX trial per (grid rate, epoch budget) and recommends a
/// learning-rate interval from the largest budget.
pub fn lr_range_test(task: &dyn Task, cfg: &RangeTestConfig) -> Result<RangeTestResult, TunerError> {
    if !task.has_accuracy() {
        return Err(TunerError::NoAccuracy(task.id().to_string()));
    }
    if cfg.grid.points < 4 {
        return Err(TunerError::BadGrid("a range test needs at least 4 points".into()));
    }
    let grid = cfg.grid.values()?;
    if cfg.budgets.is_empty() || cfg.budgets.contains(&0) {
        return Err(TunerError::InvalidConfig("epoch budgets must be positive and non-empty".into()));
    }
    let bpe = task.batches_per_epoch() as u64;
    let jobs: Vec<(f64, u64)> = grid
        .iter()
        .flat_map(|&lr| cfg.budgets.iter().map(move |&e| (lr, e)))
        .collect();
    let records = par_map(cfg.workers, jobs, |(lr, epochs)| {
        let budget = epochs * bpe;
        let tc = TrainConfig::new(cfg.optimizer, budget, cfg.seed).eval_every(budget);
        train(task, &tc, Schedule::Static(&LrPolicy::fix(lr)))
    })?;
    let mut acc = vec![vec![0.0; cfg.budgets.len()]; grid.len()];
    let mut all_diverged = true;
    for (n, r) in records.into_iter().enumerate() {
        let r = r?;
        let (i, j) = (n / cfg.budgets.len(), n % cfg.budgets.len());
        if !r.diverged {
            all_diverged = false;
            acc[i][j] = r.series.last().and_then(|m| m.top1).unwrap_or(0.0);
        }
    }
    if all_diverged {
        return Err(TunerError::AllDiverged);
    }
    let mut result = RangeTestResult {
        lr_grid: grid,
        budgets: cfg.budgets.clone(),
        acc,
        recommended: (0.0, 0.0),
    };
    let j = result.decisive_column();
    let column: Vec<f64> = result.acc.iter().map(|row| row[j]).collect();
    result.recommended = recommend(&result.lr_grid, &column);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::QuadraticTask;

    #[test]
    fn grid_values() {
        let g = LrGrid::log(1e-4, 1.0, 5).values().unwrap();
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[4], 1.0);
        assert!((g[2] - 1e-2).abs() < 1e-15);
        assert!(LrGrid::log(1.0, 1.0, 5).values().is_err());
        let lin = LrGrid {
            log_spaced: false,
            ..LrGrid::log(0.0001, 0.0005, 5)
        };
        assert!((lin.values().unwrap()[1] - 0.0002).abs() < 1e-18);
    }

    #[test]
    fn unimodal_peak_is_contained() {
        let grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
        let (lo, hi) = recommend(&grid, &[0.50, 0.90, 0.97, 0.96, 0.10]);
        assert_eq!((lo, hi), (1e-2, 1e-1));
        let (lo, hi) = recommend(&grid, &[0.50, 0.93, 0.97, 0.80, 0.10]);
        assert_eq!((lo, hi), (1e-3, 1e-2));
    }

    #[test]
    fn lone_peak_widens_to_midpoints() {
        let grid = [1e-4, 1e-3, 1e-2, 1e-1];
        let (lo, hi) = recommend(&grid, &[0.1, 0.2, 0.9, 0.3]);
        assert!((lo - (1e-5f64).sqrt()).abs() < 1e-15);
        assert!((hi - (1e-3f64).sqrt()).abs() < 1e-15);
        let (lo, hi) = recommend(&grid, &[0.9, 0.2, 0.1, 0.1]);
        assert_eq!(lo, 1e-4);
        assert!((hi - (1e-7f64).sqrt()).abs() < 1e-18);
    }

    #[test]
    fn needs_accuracy_and_points() {
        let task = QuadraticTask::new(1.0, 2);
        let cfg = RangeTestConfig {
            grid: LrGrid::log(1e-3, 1.0, 5),
            budgets: vec![1],
            optimizer: OptimizerConfig::sgd(),
            seed: 0,
            workers: 1,
        };
        assert!(matches!(lr_range_test(&task, &cfg), Err(TunerError::NoAccuracy(_))));
    }
}
