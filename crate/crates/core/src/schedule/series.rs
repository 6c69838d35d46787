use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{eval_lr, LrPolicy, ScheduleError};

/// Sampled learning-rate curve of a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSeries {
    pub policy: LrPolicy,
    /// `(t, lr)` pairs sorted by `t`.
    pub points: Vec<(u64, f64)>,
}

impl ScheduleSeries {
    /// `t,lr` CSV. Values use the shortest decimal that round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lr\n");
        for (t, lr) in &self.points {
            let _ = writeln!(out, "{t},{lr}");
        }
        out
    }
}

/// Evaluates `policy` at `t = 0, stride, 2*stride, ... < total_iters`.
pub fn schedule_series(policy: &LrPolicy, total_iters: u64, stride: u64) -> Result<ScheduleSeries, ScheduleError> {
    if stride == 0 {
        return Err(ScheduleError::ZeroStride);
    }
    policy.validated(total_iters)?;
    let points = (0..total_iters)
        .step_by(usize::try_from(stride).unwrap_or(usize::MAX))
        .map(|t| eval_lr(policy, t, total_iters).map(|lr| (t, lr)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScheduleSeries {
        policy: policy.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::CyclicKind;

    #[test]
    fn fix_series() {
        let s = schedule_series(&LrPolicy::fix(0.01), 100, 50).unwrap();
        assert_eq!(s.points, vec![(0, 0.01), (50, 0.01)]);
        assert_eq!(s.to_csv(), "t,lr\n0,0.01\n50,0.01\n");
    }

    #[test]
    fn tri_series_boundaries() {
        let p = LrPolicy::cyclic(CyclicKind::Tri, 0.01, 0.06, 2000);
        let s = schedule_series(&p, 4001, 2000).unwrap();
        let ts: Vec<u64> = s.points.iter().map(|p| p.0).collect();
        assert_eq!(ts, [0, 2000, 4000]);
        for ((_, got), want) in s.points.iter().zip([0.01, 0.06, 0.01]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_series_matches_direct_exponentiation() {
        let p = LrPolicy::Exp { k: 0.01, gamma: 0.99994 };
        let s = schedule_series(&p, 10_000, 9999).unwrap();
        assert_eq!(s.points.len(), 2);
        // exp(t ln gamma) is a different route from powf.
        let want = 0.01 * (9999.0 * 0.99994f64.ln()).exp();
        assert!((s.points[1].1 - want).abs() / want < 1e-12);
        assert!((s.points[1].1 - 0.005488).abs() < 1e-6);
    }

    #[test]
    fn rejects_zero_stride_and_invalid_policy() {
        assert_eq!(schedule_series(&LrPolicy::fix(0.1), 10, 0), Err(ScheduleError::ZeroStride));
        assert!(matches!(
            schedule_series(&LrPolicy::fix(-0.1), 10, 1),
            Err(ScheduleError::Invalid(_))
        ));
    }

    #[test]
    fn csv_round_trips_values() {
        let p = LrPolicy::cyclic(CyclicKind::Sin2, 0.00005, 0.006, 7);
        let s = schedule_series(&p, 100, 3).unwrap();
        for (line, (_, lr)) in s.to_csv().lines().skip(1).zip(&s.points) {
            let parsed: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(parsed.to_bits(), lr.to_bits());
        }
    }
}
