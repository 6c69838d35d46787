use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::harness::{train, Schedule, Task, TrainConfig};
use crate::optim::OptimizerConfig;
use crate::schedule::LrPolicy;

use super::VerifierError;

/// One M-opt estimate. `m_opt` is `None` when the estimate is singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MOptEstimate {
    /// Iteration of the middle snapshot.
    pub t: u64,
    pub applied_lr: f64,
    pub m_opt: Option<f64>,
}

impl MOptEstimate {
    pub fn is_singular(&self) -> bool {
        self.m_opt.is_none()
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `eta * |θ1 - θ0|₁ / |2θ1 - θ0 - θ2|₁`.
///
/// The estimate is singular when the denominator falls below
/// `1e-12 * max(1, |θ1 - θ0|₁)`, i.e. when two consecutive steps are equal.
pub fn m_opt_lr(theta0: &[f64], theta1: &[f64], theta2: &[f64], eta: f64) -> Result<MOptEstimate, VerifierError> {
    if theta0.len() != theta1.len() || theta1.len() != theta2.len() {
        return Err(VerifierError::LengthMismatch(theta0.len(), theta1.len(), theta2.len()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(VerifierError::BadLearningRate(eta));
    }
    let num = l1_diff(theta1, theta0);
    let den: f64 = theta0
        .iter()
        .zip(theta1)
        .zip(theta2)
        .map(|((a, b), c)| ((b - a) - (c - b)).abs())
        .sum();
    let guard = 1e-12 * num.max(1.0);
    let m_opt = if den < guard || !den.is_finite() {
        None
    } else {
        Some(eta * num / den)
    };
    Ok(MOptEstimate {
        t: 0,
        applied_lr: eta,
        m_opt,
    })
}

/// Trains with snapshots every `stride` iterations and estimates M-opt from
/// each run of three consecutive snapshots `(jM, (j+1)M, (j+2)M)`.
///
/// The applied rate is the one used for the first step after the middle
/// snapshot, read from the recorded trace.
pub fn m_opt_trace(
    task: &dyn Task,
    policy: &LrPolicy,
    optimizer: OptimizerConfig,
    budget: u64,
    stride: u64,
    seed: u64,
) -> Result<Vec<MOptEstimate>, VerifierError> {
    if stride == 0 {
        return Err(VerifierError::ZeroStride);
    }
    if budget < stride.saturating_mul(3) {
        return Err(VerifierError::BudgetTooShort { budget, stride });
    }
    let cfg = TrainConfig::new(optimizer, budget, seed)
        .eval_every(budget)
        .snapshots(stride);
    let record = train(task, &cfg, Schedule::Static(policy))?;
    let snaps = record.param_snapshots.clone().unwrap_or_default();
    if snaps.len() < 3 {
        return Err(VerifierError::Diverged(record.iters_run));
    }
    let mut out = Vec::with_capacity(snaps.len() - 2);
    for w in snaps.windows(3) {
        let t = w[1].0;
        let Some(eta) = record.lr_at(t) else {
            // The middle snapshot is the final state: no step follows it.
            break;
        };
        let mut e = m_opt_lr(&w[0].1, &w[1].1, &w[2].1, eta)?;
        e.t = t;
        out.push(e);
    }
    Ok(out)
}

/// `t,applied_lr,m_opt,singular`; singular rows leave `m_opt` empty.
pub fn mopt_csv(trace: &[MOptEstimate]) -> String {
    let mut out = String::from("t,applied_lr,m_opt,singular\n");
    for e in trace {
        let m = e.m_opt.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", e.t, e.applied_lr, m, u8::from(e.is_singular()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Landscape2d, QuadraticTask};
    use crate::schedule::CyclicKind;

    #[test]
    fn examples() {
        assert_eq!(m_opt_lr(&[0.0], &[1.0], &[1.0], 0.1).unwrap().m_opt, Some(0.1));
        assert!(m_opt_lr(&[0.0], &[1.0], &[2.0], 0.1).unwrap().is_singular());
        let e = m_opt_lr(&[0.0, 0.0], &[1.0, -1.0], &[1.5, -1.5], 0.05).unwrap();
        assert!((e.m_opt.unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(
            m_opt_lr(&[0.0], &[1.0, 2.0], &[1.0], 0.1),
            Err(VerifierError::LengthMismatch(1, 2, 1))
        ));
        assert!(m_opt_lr(&[0.0], &[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn quadratic_trace_is_inverse_curvature() {
        let task = QuadraticTask::new(2.0, 3);
        let trace = m_opt_trace(&task, &LrPolicy::fix(0.1), OptimizerConfig::sgd(), 30, 1, 0).unwrap();
        assert_eq!(trace.len(), 29);
        for e in &trace {
            let v = e.m_opt.unwrap();
            assert!((v - 0.5).abs() <= 1e-10 * 0.5, "{v}");
        }
    }

    #[test]
    fn budget_must_cover_three_strides() {
        let task = QuadraticTask::new(1.0, 2);
        let r = m_opt_trace(&task, &LrPolicy::fix(0.1), OptimizerConfig::sgd(), 20, 10, 0);
        assert!(matches!(r, Err(VerifierError::BudgetTooShort { .. })));
    }

    #[test]
    fn landscape_cyclic_trace() {
        let land = Landscape2d::default();
        let p = LrPolicy::cyclic(CyclicKind::Tri, 0.01, 0.3, 20);
        let trace = m_opt_trace(&land, &p, OptimizerConfig::sgd(), 150, 5, 0).unwrap();
        assert!(!trace.is_empty());
        assert!(trace.iter().all(|e| e.m_opt.is_none_or(|v| v > 0.0)));
        let csv = mopt_csv(&trace);
        assert!(csv.starts_with("t,applied_lr,m_opt,singular\n"));
        assert_eq!(csv.lines().count(), trace.len() + 1);
    }
}
