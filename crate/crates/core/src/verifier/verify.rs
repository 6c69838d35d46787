use serde::{Deserialize, Serialize};

use crate::db::{DbKey, PolicyDb};
use crate::harness::{Task, TrialRecord};
use crate::optim::OptimizerConfig;
use crate::schedule::{serialize_policy, CyclicKind, LrPolicy};
use crate::tuner::{
    lr_range_test, rank_aggregated, run_candidates, LrGrid, RangeTestConfig, RankMetric, Score, SearchConfig,
};

use super::VerifierError;

const METRIC: RankMetric = RankMetric::PeakTop1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub target_top1: f64,
    pub budget_iters: u64,
    pub seeds: Vec<u64>,
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<u64>,
    /// Database policies compared in phase 2.
    pub top_n: usize,
    pub workers: usize,
    /// Range-test grid for phase 3.
    pub range_grid: LrGrid,
    /// Range-test budgets in epochs for phase 3.
    pub range_budgets: Vec<u64>,
}

impl VerifyConfig {
    pub fn new(target_top1: f64, budget_iters: u64, seeds: Vec<u64>, optimizer: OptimizerConfig) -> Self {
        VerifyConfig {
            target_top1,
            budget_iters,
            seeds,
            optimizer,
            eval_every: None,
            top_n: 3,
            workers: 1,
            range_grid: LrGrid::log(1e-4, 1.0, 9),
            range_budgets: vec![1],
        }
    }

    fn search(&self) -> SearchConfig {
        SearchConfig {
            optimizer: self.optimizer,
            budget_iters: self.budget_iters,
            seeds: self.seeds.clone(),
            eval_every: self.eval_every,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// The candidate meets the target and nothing known beats it.
    Accept,
    /// Use the replacement policy instead.
    Replace,
    /// The candidate misses the target and no alternative was found.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub phase_reached: u8,
    pub verified: bool,
    pub decision: Decision,
    pub target_top1: f64,
    pub candidate: LrPolicy,
    /// Mean peak top-1 of the candidate over the seeds.
    pub candidate_score: Score,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<LrPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_score: Option<Score>,
    /// Phase-3 range recommendation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    /// Every trial consulted, cached or new.
    pub evidence: Vec<TrialRecord>,
}

fn mean_score(records: &[TrialRecord]) -> Score {
    rank_aggregated(records, METRIC)
        .first()
        .map_or(Score::Unreached, |s| s.score)
}

fn meets(score: Score, target: f64) -> bool {
    score.value().is_some_and(|v| v >= target)
}

/// Stored records of `policy` matching this verification's budget, one per
/// requested seed, if all are present.
fn cached(db: &PolicyDb, key: &DbKey, policy: &LrPolicy, cfg: &VerifyConfig) -> Option<Vec<TrialRecord>> {
    let text = serialize_policy(policy);
    let stored = db.query(key, None);
    cfg.seeds
        .iter()
        .map(|&seed| {
            stored
                .iter()
                .find(|r| {
                    r.record.seed == seed
                        && r.record.budget_iters == cfg.budget_iters
                        && serialize_policy(&r.record.policy) == text
                })
                .map(|r| r.record.clone())
        })
        .collect()
}

/// Small phase-3 grid inside `[lo, hi]`: three constants and two cycles.
fn fallback_grid(lo: f64, hi: f64, budget: u64) -> Vec<LrPolicy> {
    let l = (budget / 8).max(1);
    vec![
        LrPolicy::fix(lo),
        LrPolicy::fix((lo * hi).sqrt()),
        LrPolicy::fix(hi),
        LrPolicy::cyclic(CyclicKind::Tri, lo, hi, l),
        LrPolicy::cyclic(CyclicKind::Sin2, lo, hi, l),
    ]
}

/// Verifies `candidate` on `task` in up to three phases.
///
/// 1. Train the candidate on every seed; it is verified when its mean peak
///    top-1 reaches the target.
/// 2. If the database holds policies for this task, model and optimizer,
///    take the top `N`, train those without matching stored trials, and
///    propose the best one if it strictly beats the candidate.
/// 3. If neither the candidate nor any database policy reaches the target,
///    run a range test plus a small grid inside the recommended range and
///    propose the best result.
///
/// The database is only read.
pub fn verify_policy(
    candidate: &LrPolicy,
    task: &dyn Task,
    cfg: &VerifyConfig,
    db: &PolicyDb,
) -> Result<Verdict, VerifierError> {
    if cfg.top_n == 0 {
        return Err(VerifierError::InvalidConfig("top_n must be at least 1".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(VerifierError::InvalidConfig("at least one seed is required".into()));
    }
    let search = cfg.search();

    let mut evidence = run_candidates(task, std::slice::from_ref(candidate), &search)?;
    let candidate_score = mean_score(&evidence);
    let verified = meets(candidate_score, cfg.target_top1);
    let mut phase_reached = 1;
    let mut best: Option<(LrPolicy, Score)> = None;
    let consider = |policy: &LrPolicy, score: Score, best: &mut Option<(LrPolicy, Score)>| {
        if best.as_ref().is_none_or(|b| score.beats(b.1, METRIC)) {
            *best = Some((policy.clone(), score));
        }
    };

    let key = DbKey::new(task.id(), task.model_id(), cfg.optimizer.id());
    let own = serialize_policy(candidate);
    let db_top: Vec<LrPolicy> = db
        .top_n(&key, METRIC, cfg.top_n + 1)
        .into_iter()
        .map(|s| s.policy)
        .filter(|p| serialize_policy(p) != own)
        .take(cfg.top_n)
        .collect();
    if !db_top.is_empty() {
        phase_reached = 2;
        let mut fresh = Vec::new();
        for p in &db_top {
            match cached(db, &key, p, cfg) {
                Some(recs) => {
                    consider(p, mean_score(&recs), &mut best);
                    evidence.extend(recs);
                }
                None => fresh.push(p.clone()),
            }
        }
        if !fresh.is_empty() {
            let recs = run_candidates(task, &fresh, &search)?;
            for (i, p) in fresh.iter().enumerate() {
                let per = cfg.seeds.len();
                consider(p, mean_score(&recs[i * per..(i + 1) * per]), &mut best);
            }
            evidence.extend(recs);
        }
    }

    let db_meets = best.as_ref().is_some_and(|b| meets(b.1, cfg.target_top1));
    let mut range = None;
    if !verified && !db_meets {
        phase_reached = 3;
        let rt = lr_range_test(
            task,
            &RangeTestConfig {
                grid: cfg.range_grid,
                budgets: cfg.range_budgets.clone(),
                optimizer: cfg.optimizer,
                seed: cfg.seeds[0],
                workers: cfg.workers,
            },
        )?;
        range = Some(rt.recommended);
        let grid = fallback_grid(rt.recommended.0, rt.recommended.1, cfg.budget_iters);
        let grid: Vec<LrPolicy> = grid.into_iter().filter(|p| p.validated(cfg.budget_iters).is_ok()).collect();
        if grid.is_empty() {
            return Err(VerifierError::EmptyGrid);
        }
        let recs = run_candidates(task, &grid, &search)?;
        let phase3_best = rank_aggregated(&recs, METRIC).into_iter().next().ok_or(VerifierError::EmptyGrid)?;
        consider(&phase3_best.policy, phase3_best.score, &mut best);
        evidence.extend(recs);
    }

    let replacement = best.filter(|(_, s)| phase_reached == 3 || s.beats(candidate_score, METRIC));
    let decision = match (&replacement, verified) {
        (Some(_), _) => Decision::Replace,
        (None, true) => Decision::Accept,
        (None, false) => Decision::Reject,
    };
    Ok(Verdict {
        phase_reached,
        verified,
        decision,
        target_top1: cfg.target_top1,
        candidate: candidate.clone(),
        candidate_score,
        replacement_score: replacement.as_ref().map(|r| r.1),
        replacement: replacement.map(|r| r.0),
        range,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{load_task, TaskSpec};

    #[test]
    fn phase_one_with_empty_db() {
        let task = load_task(&TaskSpec::new("blobs2").with("n", 400)).unwrap();
        let cfg = VerifyConfig::new(0.5, 300, vec![1], OptimizerConfig::sgd());
        let v = verify_policy(&LrPolicy::fix(0.05), task.as_ref(), &cfg, &PolicyDb::in_memory()).unwrap();
        assert_eq!((v.phase_reached, v.verified, v.replacement.is_none()), (1, true, true));
        assert_eq!(v.decision, Decision::Accept);
    }
}
