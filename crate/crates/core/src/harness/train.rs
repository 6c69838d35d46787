use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::optim::{make_optimizer, OptimError, OptimizerConfig, ParamVector};
use crate::schedule::{eval_lr, LrPolicy, ScheduleError, ScheduleSeries};

use super::task::{BatchSelector, Split, Task};
use super::HarnessError;

/// Losses above this are treated as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// Validation measurement taken during a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Training iterations completed when the measurement was taken.
    pub iteration: u64,
    #[serde(with = "nonfinite")]
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top1: Option<f64>,
    #[serde(default)]
    pub wall_ms: f64,
}

/// Stored as `null` when not finite; read back as NaN.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Point where a controller switched to candidate `index` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: u64,
    pub index: usize,
}

/// Provenance and outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task_id: String,
    pub model_id: String,
    /// The static policy, or for controller runs the composite that replays
    /// the realized learning rates.
    pub policy: LrPolicy,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub budget_iters: u64,
    pub eval_every: u64,
    pub iters_run: u64,
    #[serde(default)]
    pub diverged: bool,
    pub series: Vec<Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_top1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iter_at_peak: Option<u64>,
    #[serde(with = "nonfinite")]
    pub final_loss: f64,
    pub lr_trace: ScheduleSeries,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub switches: Vec<SwitchEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_snapshots: Option<Vec<(u64, ParamVector)>>,
}

impl TrialRecord {
    /// Recomputes the peak fields from the series: the maximum top-1 and the
    /// smallest iteration attaining it.
    pub fn refresh_peak(&mut self) {
        let (peak, at) = peak_of(&self.series);
        self.peak_top1 = peak;
        self.iter_at_peak = at;
    }

    /// Checks the record's own invariants.
    pub fn check(&self) -> Result<(), String> {
        if self.iters_run > self.budget_iters {
            return Err(format!("iters_run {} exceeds budget {}", self.iters_run, self.budget_iters));
        }
        if self.series.windows(2).any(|w| w[0].iteration > w[1].iteration) {
            return Err("series is not in iteration order".into());
        }
        for m in &self.series {
            if m.iteration > self.budget_iters {
                return Err(format!("metric at iteration {} exceeds budget", m.iteration));
            }
            if let Some(a) = m.top1 {
                if !(0.0..=1.0).contains(&a) {
                    return Err(format!("top1 {a} outside [0,1]"));
                }
            }
        }
        let (peak, at) = peak_of(&self.series);
        if !self.series.is_empty() && (peak != self.peak_top1 || at != self.iter_at_peak) {
            return Err("peak fields disagree with the series".into());
        }
        if self.diverged {
            let last = self.series.last().map(|m| m.loss);
            if !matches!(last, Some(l) if !l.is_finite() || l > DIVERGENCE_LOSS) {
                return Err("diverged record must end with a non-finite or exploded loss".into());
            }
        }
        Ok(())
    }

    /// Zeroes every wall-clock field so that identical runs compare equal.
    pub fn without_timing(mut self) -> Self {
        for m in &mut self.series {
            m.wall_ms = 0.0;
        }
        self
    }

    /// Learning rate applied at iteration `t`, if it was recorded.
    pub fn lr_at(&self, t: u64) -> Option<f64> {
        let pts = &self.lr_trace.points;
        pts.binary_search_by_key(&t, |p| p.0).ok().map(|i| pts[i].1)
    }

    /// `iter,loss,top1,lr` with one row per evaluation. `lr` is the rate used
    /// for the last iteration before the evaluation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss,top1,lr\n");
        for m in &self.series {
            let top1 = m.top1.map(|a| a.to_string()).unwrap_or_default();
            let lr = m
                .iteration
                .checked_sub(1)
                .and_then(|t| self.lr_at(t))
                .map(|v| v.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", m.iteration, m.loss, top1, lr);
        }
        out
    }
}

fn peak_of(series: &[Metrics]) -> (Option<f64>, Option<u64>) {
    let mut best: Option<(f64, u64)> = None;
    for m in series {
        if let Some(a) = m.top1 {
            if best.is_none_or(|(b, _)| a > b) {
                best = Some((a, m.iteration));
            }
        }
    }
    (best.map(|b| b.0), best.map(|b| b.1))
}

/// Picks the learning rate online, e.g. from observed losses.
pub trait LrController: Send {
    /// Learning rate for iteration `t`.
    fn lr(&mut self, t: u64) -> Result<f64, ScheduleError>;
    /// Called after iteration `t` with its mini-batch loss and, when a
    /// validation pass ran right after it, that measurement.
    fn observe(&mut self, t: u64, train_loss: f64, eval: Option<&Metrics>);
    /// A static policy reproducing every rate handed out over `iters_run` iterations.
    fn realized_policy(&self, iters_run: u64) -> LrPolicy;
    fn switches(&self) -> Vec<SwitchEvent> {
        Vec::new()
    }
}

pub enum Schedule<'a> {
    Static(&'a LrPolicy),
    Controller(&'a mut dyn LrController),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub budget_iters: u64,
    pub seed: u64,
    /// `None` means `max(budget / 100, 1)`.
    pub eval_every: Option<u64>,
    /// Keep parameter snapshots every this many iterations.
    pub snapshot_stride: Option<u64>,
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerConfig, budget_iters: u64, seed: u64) -> Self {
        TrainConfig {
            optimizer,
            budget_iters,
            seed,
            eval_every: None,
            snapshot_stride: None,
        }
    }

    pub fn eval_every(mut self, every: u64) -> Self {
        self.eval_every = Some(every);
        self
    }

    pub fn snapshots(mut self, stride: u64) -> Self {
        self.snapshot_stride = Some(stride);
        self
    }

    pub fn resolved_eval_every(&self) -> u64 {
        self.eval_every.unwrap_or((self.budget_iters / 100).max(1))
    }
}

/// Full-split evaluation of `theta`, tagged with iteration 0.
pub fn evaluate(task: &dyn Task, theta: &[f64], split: Split) -> Metrics {
    let e = task.evaluate(theta, split);
    Metrics {
        iteration: 0,
        loss: e.loss,
        top1: e.top1,
        wall_ms: 0.0,
    }
}

fn diverging(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_LOSS
}

/// Runs one trial: `budget_iters` optimizer steps with the learning rate
/// taken from `schedule`, validating every `eval_every` iterations and after
/// the last one.
///
/// A non-finite or exploding loss stops the run early with `diverged` set;
/// the last series entry then carries that loss.
pub fn train(task: &dyn Task, config: &TrainConfig, mut schedule: Schedule<'_>) -> Result<TrialRecord, HarnessError> {
    let budget = config.budget_iters;
    if budget == 0 {
        return Err(HarnessError::InvalidConfig("budget_iters must be at least 1".into()));
    }
    let eval_every = config.resolved_eval_every();
    if eval_every == 0 {
        return Err(HarnessError::InvalidConfig("eval_every must be at least 1".into()));
    }
    if config.snapshot_stride == Some(0) {
        return Err(HarnessError::InvalidConfig("snapshot stride must be at least 1".into()));
    }
    if let Schedule::Static(policy) = &schedule {
        policy.validated(budget)?;
    }

    let started = Instant::now();
    let mut theta = task.init_params(config.seed);
    let mut state = make_optimizer(&config.optimizer, theta.len())?;
    let bpe = task.batches_per_epoch() as u64;
    let n = task.train_size();
    let b = task.batch_size().max(1);

    let mut series = Vec::new();
    let mut lr_points = Vec::with_capacity(budget as usize);
    let mut snapshots = config.snapshot_stride.map(|_| vec![(0u64, theta.clone())]);
    let mut diverged = false;
    let mut perm: Vec<usize> = Vec::new();
    let mut perm_epoch = u64::MAX;
    let mut iters_run = 0;

    for t in 0..budget {
        let lr = match &mut schedule {
            Schedule::Static(p) => eval_lr(p, t, budget)?,
            Schedule::Controller(c) => c.lr(t)?,
        };
        let (epoch, index) = (t / bpe, (t % bpe) as usize);
        let (loss, grad) = if n == 0 {
            task.loss_and_grad(&theta, BatchSelector::Full(Split::Train))
        } else {
            if perm_epoch != epoch {
                perm = super::data::epoch_permutation(config.seed, epoch, n);
                perm_epoch = epoch;
            }
            let lo = (index * b).min(n);
            task.loss_and_grad(&theta, BatchSelector::Rows(&perm[lo..(lo + b).min(n)]))
        };
        let step = if diverging(loss) {
            Err(OptimError::NonFinite("loss"))
        } else {
            state.step(&mut theta, &grad, lr)
        };
        if let Err(e) = step {
            match e {
                OptimError::NonFinite(_) => {
                    log::debug!("trial diverged at iteration {t} (loss {loss})");
                    let top1 = if theta.is_finite() { task.evaluate(&theta, Split::Validation).top1 } else { None };
                    series.push(Metrics {
                        iteration: t,
                        loss: if diverging(loss) { loss } else { f64::INFINITY },
                        top1,
                        wall_ms: started.elapsed().as_secs_f64() * 1e3,
                    });
                    diverged = true;
                    iters_run = t;
                    break;
                }
                other => return Err(other.into()),
            }
        }
        lr_points.push((t, lr));
        iters_run = t + 1;

        let done = t + 1;
        if let (Some(stride), Some(snaps)) = (config.snapshot_stride, snapshots.as_mut()) {
            if done % stride == 0 {
                snaps.push((done, theta.clone()));
            }
        }
        let eval = if done % eval_every == 0 || done == budget {
            let e = task.evaluate(&theta, Split::Validation);
            series.push(Metrics {
                iteration: done,
                loss: e.loss,
                top1: e.top1,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
            series.last()
        } else {
            None
        };
        if let Schedule::Controller(c) = &mut schedule {
            c.observe(t, loss, eval);
        }
        if eval.is_some_and(|m| diverging(m.loss)) {
            diverged = true;
            break;
        }
    }

    let (policy, switches) = match &schedule {
        Schedule::Static(p) => ((*p).clone(), Vec::new()),
        Schedule::Controller(c) => (c.realized_policy(iters_run.max(1)), c.switches()),
    };
    let final_loss = series.last().map(|m| m.loss).unwrap_or(f64::NAN);
    let mut record = TrialRecord {
        task_id: task.id().to_string(),
        model_id: task.model_id().to_string(),
        lr_trace: ScheduleSeries {
            policy: policy.clone(),
            points: lr_points,
        },
        policy,
        optimizer: config.optimizer,
        seed: config.seed,
        budget_iters: budget,
        eval_every,
        iters_run,
        diverged,
        series,
        peak_top1: None,
        iter_at_peak: None,
        final_loss,
        switches,
        param_snapshots: snapshots,
    };
    record.refresh_peak();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::landscape::Landscape2d;
    use crate::harness::task::QuadraticTask;

    #[test]
    fn rejects_bad_configs() {
        let task = QuadraticTask::new(1.0, 2);
        let p = LrPolicy::fix(0.1);
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 0, 0);
        assert!(train(&task, &cfg, Schedule::Static(&p)).is_err());
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 10, 0).eval_every(0);
        assert!(train(&task, &cfg, Schedule::Static(&p)).is_err());
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 10, 0);
        assert!(matches!(
            train(&task, &cfg, Schedule::Static(&LrPolicy::fix(0.0))),
            Err(HarnessError::Schedule(ScheduleError::Invalid(_)))
        ));
    }

    #[test]
    fn eval_cadence_includes_final_iteration() {
        let task = QuadraticTask::new(1.0, 2);
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 25, 0).eval_every(10);
        let r = train(&task, &cfg, Schedule::Static(&LrPolicy::fix(0.1))).unwrap();
        let its: Vec<u64> = r.series.iter().map(|m| m.iteration).collect();
        assert_eq!(its, [10, 20, 25]);
        assert_eq!(r.lr_trace.points.len(), 25);
        assert!(r.peak_top1.is_none());
        r.check().unwrap();
    }

    #[test]
    fn divergence_stops_the_run() {
        let task = QuadraticTask::new(1.0, 2);
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 1000, 0).eval_every(1);
        let r = train(&task, &cfg, Schedule::Static(&LrPolicy::fix(5.0))).unwrap();
        assert!(r.diverged);
        assert!(r.iters_run < 1000);
        assert!(r.final_loss > DIVERGENCE_LOSS || !r.final_loss.is_finite());
        r.check().unwrap();
    }

    #[test]
    fn snapshots_follow_stride() {
        let task = QuadraticTask::new(2.0, 3);
        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 10, 1).snapshots(4);
        let r = train(&task, &cfg, Schedule::Static(&LrPolicy::fix(0.1))).unwrap();
        let ts: Vec<u64> = r.param_snapshots.unwrap().iter().map(|s| s.0).collect();
        assert_eq!(ts, [0, 4, 8]);
    }

    #[test]
    fn small_fixed_steps_descend_the_landscape() {
        // Hand-rolled reference loop on the same surface.
        let land = Landscape2d::default();
        let mut p = land.start;
        let mut costs = vec![land.cost(p)];
        for _ in 0..10 {
            let (_, g) = land.cost_and_grad(p);
            p = [p[0] - 1e-3 * g[0], p[1] - 1e-3 * g[1]];
            costs.push(land.cost(p));
        }
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));

        let cfg = TrainConfig::new(OptimizerConfig::sgd(), 10, 0).eval_every(1);
        let r = train(&land, &cfg, Schedule::Static(&LrPolicy::fix(1e-3))).unwrap();
        let got: Vec<f64> = r.series.iter().map(|m| m.loss).collect();
        assert_eq!(got, costs[1..]);
    }

    #[test]
    fn json_keeps_nonfinite_losses_readable() {
        let m = Metrics {
            iteration: 3,
            loss: f64::INFINITY,
            top1: None,
            wall_ms: 0.0,
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"iteration":3,"loss":null,"wall_ms":0.0}"#);
        let back: Metrics = serde_json::from_str(&text).unwrap();
        assert!(back.loss.is_nan());
    }
}
