use serde::{Deserialize, Serialize};

use crate::schedule::{CyclicKind, LrPolicy, ScheduleError, Segment, Violation};

/// One cyclic stage of a staged composite, covering `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub start: u64,
    pub end: u64,
    pub kind: CyclicKind,
    pub k0: f64,
    pub k1: f64,
    pub l: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Stage {
    pub fn new(start: u64, end: u64, kind: CyclicKind, k0: f64, k1: f64, l: u64) -> Self {
        Stage {
            start,
            end,
            kind,
            k0,
            k1,
            l,
            gamma: None,
        }
    }

    fn policy(&self) -> LrPolicy {
        LrPolicy::Cyclic {
            kind: self.kind,
            k0: self.k0,
            k1: self.k1,
            l: self.l,
            gamma: self.gamma,
        }
    }
}

/// Builds a COMPOSITE from contiguous cyclic stages. Each stage restarts its
/// own clock, so a stage starts at its `min(k0, k1)` phase.
pub fn compose_staged_policy(stages: &[Stage]) -> Result<LrPolicy, ScheduleError> {
    let mut bad = Vec::new();
    if stages.is_empty() {
        bad.push(Violation {
            path: "stages".into(),
            reason: "at least one stage is required".into(),
        });
    }
    for (i, w) in stages.windows(2).enumerate() {
        if w[1].start > w[0].end {
            bad.push(Violation {
                path: format!("stages[{}]", i + 1),
                reason: format!("gap between {} and {}", w[0].end, w[1].start),
            });
        } else if w[1].start < w[0].end {
            bad.push(Violation {
                path: format!("stages[{}]", i + 1),
                reason: format!("overlaps the previous stage ({} < {})", w[1].start, w[0].end),
            });
        }
    }
    if !bad.is_empty() {
        return Err(ScheduleError::Invalid(bad));
    }
    let policy = LrPolicy::Composite {
        segments: stages.iter().map(|s| Segment::new(s.start, s.end, s.policy())).collect(),
    };
    let total = stages.last().map(|s| s.end).unwrap_or(0);
    policy.validated(total)?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::eval_lr;

    fn resnet_stages() -> Vec<Stage> {
        vec![
            Stage::new(0, 30000, CyclicKind::Tri, 0.1, 0.5, 1500),
            Stage::new(30000, 60000, CyclicKind::Tri, 0.01, 0.05, 1000),
            Stage::new(60000, 64000, CyclicKind::Tri, 0.001, 0.005, 500),
        ]
    }

    #[test]
    fn three_stage_triangle() {
        let p = compose_staged_policy(&resnet_stages()).unwrap();
        assert_eq!(eval_lr(&p, 30000, 64000).unwrap(), 0.01);
        assert_eq!(eval_lr(&p, 0, 64000).unwrap(), 0.1);
        assert!((eval_lr(&p, 1500, 64000).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(eval_lr(&p, 60000, 64000).unwrap(), 0.001);
        assert!((eval_lr(&p, 60500, 64000).unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn single_stage_is_the_plain_cyclic() {
        let s = Stage::new(0, 5000, CyclicKind::Sin2, 0.01, 0.06, 700);
        let p = compose_staged_policy(std::slice::from_ref(&s)).unwrap();
        let plain = s.policy();
        for t in 0..5000 {
            assert_eq!(eval_lr(&p, t, 5000).unwrap(), eval_lr(&plain, t, 5000).unwrap());
        }
    }

    #[test]
    fn gaps_and_overlaps_are_rejected() {
        let mut s = resnet_stages();
        s[1].start = 30001;
        assert!(compose_staged_policy(&s).unwrap_err().to_string().contains("gap"));
        let mut s = resnet_stages();
        s[2].start = 59000;
        assert!(compose_staged_policy(&s).unwrap_err().to_string().contains("overlaps"));
        assert!(compose_staged_policy(&[]).is_err());
    }
}
