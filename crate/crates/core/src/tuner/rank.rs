use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::harness::TrialRecord;
use crate::schedule::{serialize_policy, LrPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "target", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RankMetric {
    /// Highest validation top-1; larger is better.
    PeakTop1,
    /// Last validation loss; smaller is better.
    FinalLoss,
    /// First iteration reaching the given top-1; smaller is better.
    ItersToTarget(f64),
}

impl fmt::Display for RankMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankMetric::PeakTop1 => f.write_str("peak_top1"),
            RankMetric::FinalLoss => f.write_str("final_loss"),
            RankMetric::ItersToTarget(t) => write!(f, "iters_to_target:{t}"),
        }
    }
}

impl FromStr for RankMetric {
    type Err = String;

    /// Accepts `peak_top1`, `final_loss` or `iters_to_target:<top1>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "peak_top1" => Ok(RankMetric::PeakTop1),
            "final_loss" => Ok(RankMetric::FinalLoss),
            _ => {
                let target = s
                    .strip_prefix("iters_to_target:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| (0.0..=1.0).contains(v))
                    .ok_or_else(|| {
                        format!("unknown metric {s:?} (expected peak_top1, final_loss or iters_to_target:<0..1>)")
                    })?;
                Ok(RankMetric::ItersToTarget(target))
            }
        }
    }
}

impl RankMetric {
    fn larger_is_better(self) -> bool {
        matches!(self, RankMetric::PeakTop1)
    }

    /// The metric value of one record.
    pub fn score(self, record: &TrialRecord) -> Score {
        match self {
            RankMetric::PeakTop1 => match record.peak_top1 {
                Some(v) => Score::Value(v),
                None if record.diverged => Score::Value(0.0),
                None => Score::Unreached,
            },
            RankMetric::FinalLoss => Score::from_f64(record.final_loss),
            RankMetric::ItersToTarget(target) => match iterations_to_target(record, target) {
                Some(t) => Score::Value(t as f64),
                None => Score::Unreached,
            },
        }
    }
}

/// A metric value; `Unreached` ranks after every value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Value(f64),
    Unreached,
}

impl Score {
    fn from_f64(v: f64) -> Score {
        if v.is_nan() {
            Score::Unreached
        } else {
            Score::Value(v)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Score::Value(v) => Some(v),
            Score::Unreached => None,
        }
    }

    fn cmp_for(self, other: Score, metric: RankMetric) -> Ordering {
        match (self, other) {
            (Score::Value(a), Score::Value(b)) => {
                let o = a.total_cmp(&b);
                if metric.larger_is_better() {
                    o.reverse()
                } else {
                    o
                }
            }
            (Score::Value(_), Score::Unreached) => Ordering::Less,
            (Score::Unreached, Score::Value(_)) => Ordering::Greater,
            (Score::Unreached, Score::Unreached) => Ordering::Equal,
        }
    }

    /// True when `self` is strictly better than `other` under `metric`.
    pub fn beats(self, other: Score, metric: RankMetric) -> bool {
        self.cmp_for(other, metric) == Ordering::Less
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Value(v) => write!(f, "{v}"),
            Score::Unreached => f.write_str("unreached"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Value(v) if v.is_finite() => s.serialize_f64(*v),
            Score::Value(v) => s.serialize_str(&v.to_string()),
            Score::Unreached => s.serialize_str("unreached"),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Score::Value(v)),
            Raw::Text(t) if t == "unreached" => Ok(Score::Unreached),
            Raw::Text(t) => t
                .parse::<f64>()
                .map(Score::Value)
                .map_err(|_| serde::de::Error::custom(format!("bad score {t:?}"))),
        }
    }
}

/// Smallest evaluated iteration whose top-1 reaches `target`.
pub fn iterations_to_target(record: &TrialRecord, target: f64) -> Option<u64> {
    record
        .series
        .iter()
        .find(|m| m.top1.is_some_and(|a| a >= target))
        .map(|m| m.iteration)
}

#[derive(Debug, Clone, Copy)]
pub struct Ranked<'a> {
    pub record: &'a TrialRecord,
    pub score: Score,
}

/// Orders `records` best first. Ties fall back to the serialized policy, then
/// the seed, then the whole record, so any permutation of the input gives the
/// same output.
pub fn rank_policies(records: &[TrialRecord], metric: RankMetric) -> Vec<Ranked<'_>> {
    let mut keyed: Vec<(Score, String, u64, String, &TrialRecord)> = records
        .iter()
        .map(|r| {
            (
                metric.score(r),
                serialize_policy(&r.policy),
                r.seed,
                serde_json::to_string(r).unwrap_or_default(),
                r,
            )
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp_for(b.0, metric)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.3.cmp(&b.3))
    });
    keyed
        .into_iter()
        .map(|(score, _, _, _, record)| Ranked { record, score })
        .collect()
}

/// Mean metric of one policy over its trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyScore {
    pub policy: LrPolicy,
    pub score: Score,
    pub trials: usize,
}

/// Groups records by serialized policy, averages the metric within each
/// group and ranks the groups. A group with any unreached trial is
/// unreached.
pub fn rank_aggregated(records: &[TrialRecord], metric: RankMetric) -> Vec<PolicyScore> {
    let mut groups: BTreeMap<String, (LrPolicy, Vec<Score>)> = BTreeMap::new();
    for r in records {
        groups
            .entry(serialize_policy(&r.policy))
            .or_insert_with(|| (r.policy.clone(), Vec::new()))
            .1
            .push(metric.score(r));
    }
    let mut out: Vec<(String, PolicyScore)> = groups
        .into_iter()
        .map(|(key, (policy, scores))| {
            let values: Option<Vec<f64>> = scores.iter().map(|s| s.value()).collect();
            let score = match values {
                Some(v) => Score::Value(v.iter().sum::<f64>() / v.len() as f64),
                None => Score::Unreached,
            };
            (
                key,
                PolicyScore {
                    policy,
                    score,
                    trials: scores.len(),
                },
            )
        })
        .collect();
    out.sort_by(|a, b| a.1.score.cmp_for(b.1.score, metric).then_with(|| a.0.cmp(&b.0)));
    out.into_iter().map(|(_, s)| s).collect()
}
