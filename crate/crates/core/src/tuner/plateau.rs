use serde::{Deserialize, Serialize};

use crate::harness::{train, LrController, Metrics, Schedule, SwitchEvent, Task, TrainConfig, TrialRecord};
use crate::schedule::{eval_lr, LrPolicy, ScheduleError, Segment};

use super::TunerError;

/// Number of evenly spaced iterations at which candidate ordering is checked
/// when the candidates are not both constant.
pub const ORDERING_SAMPLES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Monitored {
    /// Mini-batch loss of every iteration.
    TrainLoss,
    /// Validation loss, observed at the evaluation cadence only.
    ValLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub patience: usize,
    pub min_delta: f64,
    pub monitored: Monitored,
    pub warmup: u64,
    pub phase_split: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            patience: 5,
            min_delta: 0.05,
            monitored: Monitored::TrainLoss,
            warmup: 0,
            phase_split: 0.7,
        }
    }
}

impl PlateauConfig {
    pub fn check(&self, budget: u64) -> Result<(), TunerError> {
        if self.patience == 0 {
            return Err(TunerError::InvalidConfig("patience must be at least 1".into()));
        }
        if !(self.min_delta > 0.0 && self.min_delta.is_finite()) {
            return Err(TunerError::InvalidConfig("min_delta must be a positive number".into()));
        }
        if !(self.phase_split > 0.0 && self.phase_split < 1.0) {
            return Err(TunerError::InvalidConfig("phase_split must lie in (0, 1)".into()));
        }
        if self.warmup >= budget {
            return Err(TunerError::InvalidConfig(format!(
                "warmup {} must be below the budget {budget}",
                self.warmup
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    None,
    Increase,
    Decrease,
}

/// Decides whether training sits on a plateau.
///
/// The window is the last `patience` entries of `history` followed by `m`.
/// Its improvement is the oldest value minus the best later one; a plateau
/// is an improvement of at most `min_delta`. With fewer than `patience`
/// entries in `history` there is no verdict yet.
pub fn is_trapped_on_plateau_action(history: &[f64], m: f64, t: u64, budget: u64, cfg: &PlateauConfig) -> Action {
    if t < cfg.warmup || cfg.patience == 0 || history.len() < cfg.patience {
        return Action::None;
    }
    let window = &history[history.len() - cfg.patience..];
    let best_later = window[1..].iter().copied().fold(m, f64::min);
    let improvement = window[0] - best_later;
    // NaN improvement (diverging loss) also counts as stagnation.
    if improvement > cfg.min_delta {
        return Action::None;
    }
    if (t as f64) < cfg.phase_split * budget as f64 {
        Action::Increase
    } else {
        Action::Decrease
    }
}

/// Verifies `policies[0] >= policies[1] >= ...` pointwise. Two constants are
/// compared exactly; other pairs at [`ORDERING_SAMPLES`] evenly spaced
/// iterations.
pub fn check_ordering(policies: &[LrPolicy], budget: u64) -> Result<(), TunerError> {
    let samples: Vec<u64> = if budget <= ORDERING_SAMPLES {
        (0..budget).collect()
    } else {
        let mut v: Vec<u64> = (0..ORDERING_SAMPLES)
            .map(|j| j * (budget - 1) / (ORDERING_SAMPLES - 1))
            .collect();
        v.dedup();
        v
    };
    for (i, pair) in policies.windows(2).enumerate() {
        let ts: &[u64] = match pair {
            [LrPolicy::Fix { .. }, LrPolicy::Fix { .. }] => &[0],
            _ => &samples,
        };
        for &t in ts {
            let hi = eval_lr(&pair[0], t, budget)?;
            let lo = eval_lr(&pair[1], t, budget)?;
            if hi < lo {
                return Err(TunerError::OrderingViolation {
                    upper: i,
                    lower: i + 1,
                    t,
                    upper_lr: hi,
                    lower_lr: lo,
                });
            }
        }
    }
    Ok(())
}

/// Live controller switching among ordered candidate policies.
///
/// Indices are 0-based, so index 0 is the largest policy. A switch restarts
/// the clock of the newly selected policy, which makes the realized run
/// exactly a COMPOSITE of segment-local policies.
#[derive(Debug, Clone)]
pub struct PlateauController {
    policies: Vec<LrPolicy>,
    cfg: PlateauConfig,
    budget: u64,
    index: usize,
    segment_start: u64,
    history: Vec<f64>,
    segments: Vec<(u64, usize)>,
    switches: Vec<SwitchEvent>,
}

impl PlateauController {
    pub fn new(policies: Vec<LrPolicy>, start: usize, budget: u64, cfg: PlateauConfig) -> Result<Self, TunerError> {
        if policies.is_empty() {
            return Err(TunerError::EmptyCandidates);
        }
        if start >= policies.len() {
            return Err(TunerError::InvalidStartIndex {
                index: start,
                n: policies.len(),
            });
        }
        cfg.check(budget)?;
        for p in &policies {
            if matches!(p, LrPolicy::Composite { .. }) {
                return Err(TunerError::InvalidConfig("composite policies cannot be plateau candidates".into()));
            }
            p.validated(budget)?;
        }
        check_ordering(&policies, budget)?;
        Ok(PlateauController {
            policies,
            cfg,
            budget,
            index: start,
            segment_start: 0,
            history: Vec::new(),
            segments: vec![(0, start)],
            switches: Vec::new(),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Feeds one monitored value observed after iteration `t` and applies the
    /// resulting action.
    pub fn feed(&mut self, t: u64, m: f64) -> Action {
        let action = is_trapped_on_plateau_action(&self.history, m, t, self.budget, &self.cfg);
        let target = match action {
            Action::None => {
                self.history.push(m);
                return action;
            }
            Action::Increase => self.index.checked_sub(1),
            Action::Decrease => Some(self.index + 1).filter(|&i| i < self.policies.len()),
        };
        self.history.clear();
        if let Some(i) = target {
            if t + 1 < self.budget {
                self.index = i;
                self.segment_start = t + 1;
                self.segments.push((t + 1, i));
                self.switches.push(SwitchEvent { t: t + 1, index: i });
            }
        }
        action
    }

    fn pinned(policy: &LrPolicy, budget: u64) -> LrPolicy {
        match policy {
            LrPolicy::Poly { k, p, max_iter: None } => LrPolicy::Poly {
                k: *k,
                p: *p,
                max_iter: Some(budget),
            },
            other => other.clone(),
        }
    }
}

impl LrController for PlateauController {
    fn lr(&mut self, t: u64) -> Result<f64, ScheduleError> {
        eval_lr(&self.policies[self.index], t - self.segment_start, self.budget)
    }

    fn observe(&mut self, t: u64, train_loss: f64, eval: Option<&Metrics>) {
        let m = match (self.cfg.monitored, eval) {
            (Monitored::TrainLoss, _) => train_loss,
            (Monitored::ValLoss, Some(e)) => e.loss,
            (Monitored::ValLoss, None) => return,
        };
        self.feed(t, m);
    }

    fn realized_policy(&self, iters_run: u64) -> LrPolicy {
        if self.segments.len() == 1 {
            return self.policies[self.segments[0].1].clone();
        }
        let end = self.budget.max(iters_run);
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(j, &(start, i))| {
                let stop = self.segments.get(j + 1).map_or(end, |s| s.0);
                Segment::new(start, stop, Self::pinned(&self.policies[i], self.budget))
            })
            .collect();
        LrPolicy::Composite { segments }
    }

    fn switches(&self) -> Vec<SwitchEvent> {
        self.switches.clone()
    }
}

/// Trains `task` while switching among `policies` on plateaus, starting at
/// index `start` (0-based). The record's policy replays the realized rates.
pub fn change_lr_on_plateau(
    task: &dyn Task,
    policies: &[LrPolicy],
    start: usize,
    config: &TrainConfig,
    cfg: &PlateauConfig,
) -> Result<TrialRecord, TunerError> {
    let mut ctl = PlateauController::new(policies.to_vec(), start, config.budget_iters, cfg.clone())?;
    Ok(train(task, config, Schedule::Controller(&mut ctl))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::QuadraticTask;
    use crate::optim::OptimizerConfig;
    use crate::schedule::CyclicKind;

    const HIST: [f64; 5] = [1.0, 0.99, 0.985, 0.984, 0.9839];

    #[test]
    fn action_examples() {
        let cfg = PlateauConfig::default();
        assert_eq!(is_trapped_on_plateau_action(&HIST, 0.9838, 100, 1000, &cfg), Action::Increase);
        assert_eq!(is_trapped_on_plateau_action(&HIST, 0.9838, 900, 1000, &cfg), Action::Decrease);
        assert_eq!(is_trapped_on_plateau_action(&[1.0, 0.8], 0.7, 100, 1000, &cfg), Action::None);
        let warm = PlateauConfig { warmup: 200, ..cfg.clone() };
        assert_eq!(is_trapped_on_plateau_action(&HIST, 0.9838, 100, 1000, &warm), Action::None);
        let falling = [1.0, 0.9, 0.8, 0.7, 0.6];
        assert_eq!(is_trapped_on_plateau_action(&falling, 0.5, 100, 1000, &cfg), Action::None);
    }

    #[test]
    fn defaults() {
        let c = PlateauConfig::default();
        assert_eq!((c.patience, c.min_delta, c.phase_split, c.warmup), (5, 0.05, 0.7, 0));
        assert_eq!(c.monitored, Monitored::TrainLoss);
    }

    fn fixes() -> Vec<LrPolicy> {
        vec![LrPolicy::fix(0.05), LrPolicy::fix(0.01), LrPolicy::fix(0.002)]
    }

    #[test]
    fn scripted_early_plateau_switches_up_once() {
        let mut c = PlateauController::new(fixes(), 1, 1000, PlateauConfig::default()).unwrap();
        let mut stream = vec![2.0, 1.8, 1.6, 1.4, 1.2, 1.0];
        stream.extend([0.9; 6]);
        stream.extend((0..40).map(|i| 0.8 - 0.06 * i as f64));
        for (t, m) in stream.into_iter().enumerate() {
            c.feed(t as u64, m);
        }
        assert_eq!(c.index(), 0);
        assert_eq!(c.switches(), vec![SwitchEvent { t: 12, index: 0 }]);
    }

    #[test]
    fn index_is_clamped() {
        let mut c = PlateauController::new(fixes(), 0, 100, PlateauConfig::default()).unwrap();
        for t in 0..60 {
            c.feed(t, 1.0);
            assert!(c.index() < 3);
        }
        assert_eq!(c.index(), 0);
        for t in 70..100 {
            c.feed(t, 1.0);
        }
        assert_eq!(c.index(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = fixes();
        assert!(matches!(
            PlateauController::new(p.clone(), 3, 100, PlateauConfig::default()),
            Err(TunerError::InvalidStartIndex { index: 3, n: 3 })
        ));
        let rev: Vec<_> = p.iter().rev().cloned().collect();
        assert!(matches!(
            PlateauController::new(rev, 0, 100, PlateauConfig::default()),
            Err(TunerError::OrderingViolation { .. })
        ));
        let warm = PlateauConfig {
            warmup: 100,
            ..Default::default()
        };
        assert!(PlateauController::new(p, 0, 100, warm).is_err());
    }

    #[test]
    fn cyclic_ordering_is_sampled() {
        let hi = LrPolicy::cyclic(CyclicKind::Tri, 0.01, 0.06, 50);
        let lo = LrPolicy::fix(0.01);
        assert!(check_ordering(&[hi.clone(), lo.clone()], 1000).is_ok());
        assert!(check_ordering(&[lo, hi], 1000).is_err());
    }

    #[test]
    fn single_candidate_matches_plain_training() {
        let task = QuadraticTask::new(1.0, 3);
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 50, 4).eval_every(5);
        let p = LrPolicy::fix(0.1);
        let a = change_lr_on_plateau(&task, std::slice::from_ref(&p), 0, &cfg, &PlateauConfig::default()).unwrap();
        let b = train(&task, &cfg, Schedule::Static(&p)).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }
}
