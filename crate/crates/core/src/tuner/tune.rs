use serde::{Deserialize, Serialize};

use crate::harness::{Task, TrialRecord};
use crate::optim::OptimizerConfig;
use crate::schedule::LrPolicy;

use super::plateau::{change_lr_on_plateau, PlateauConfig};
use super::rank::{rank_aggregated, rank_policies, PolicyScore, RankMetric};
use super::search::{run_candidates, SearchConfig, SearchSpace};
use super::{par_map, TunerError};

/// Policies carried from the breadth pass into the full-seed reruns.
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Grid {
        space: SearchSpace,
    },
    Random {
        space: SearchSpace,
        samples: usize,
        sample_seed: u64,
    },
    /// Plateau-driven switching among `policies`, largest first, starting
    /// at index `start`.
    Plateau {
        policies: Vec<LrPolicy>,
        start: usize,
        config: PlateauConfig,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Grid { .. } => "grid",
            Strategy::Random { .. } => "random",
            Strategy::Plateau { .. } => "plateau",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub search: SearchConfig,
    pub metric: RankMetric,
    pub top_k: usize,
}

impl TuneConfig {
    pub fn new(optimizer: OptimizerConfig, budget_iters: u64, seeds: Vec<u64>) -> Self {
        TuneConfig {
            search: SearchConfig::new(optimizer, budget_iters, seeds),
            metric: RankMetric::PeakTop1,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub task_id: String,
    pub model_id: String,
    pub strategy: Strategy,
    pub config: TuneConfig,
    pub candidates: Vec<LrPolicy>,
    /// Every trial on the full seed list, seed-major within each policy.
    pub records: Vec<TrialRecord>,
    pub ranking: Vec<PolicyScore>,
    pub recommended: LrPolicy,
}

/// Runs a tuning strategy.
///
/// Grid and random search train every candidate on the first seed, keep the
/// `top_k` best and rerun those on the remaining seeds; the ranking is over
/// the reruns. The plateau strategy runs once per seed and recommends the
/// composite realized by the best-ranked run.
pub fn tune(task: &dyn Task, strategy: &Strategy, cfg: &TuneConfig) -> Result<TuningReport, TunerError> {
    let seeds = &cfg.search.seeds;
    if seeds.is_empty() {
        return Err(TunerError::InvalidConfig("at least one seed is required".into()));
    }
    if cfg.top_k == 0 {
        return Err(TunerError::InvalidConfig("top_k must be at least 1".into()));
    }
    let (candidates, records, ranking, recommended) = match strategy {
        Strategy::Grid { space } | Strategy::Random { space, .. } => {
            let candidates = match strategy {
                Strategy::Random {
                    samples, sample_seed, ..
                } => space.sample(*samples, *sample_seed)?,
                _ => space.grid()?,
            };
            let breadth_cfg = SearchConfig {
                seeds: vec![seeds[0]],
                ..cfg.search.clone()
            };
            let breadth = run_candidates(task, &candidates, &breadth_cfg)?;
            let top: Vec<LrPolicy> = rank_aggregated(&breadth, cfg.metric)
                .into_iter()
                .take(cfg.top_k)
                .map(|s| s.policy)
                .collect();
            let mut records = Vec::new();
            if seeds.len() > 1 {
                let depth_cfg = SearchConfig {
                    seeds: seeds[1..].to_vec(),
                    ..cfg.search.clone()
                };
                let depth = run_candidates(task, &top, &depth_cfg)?;
                let per = seeds.len() - 1;
                for (i, p) in top.iter().enumerate() {
                    records.extend(breadth.iter().find(|r| &r.policy == p).cloned());
                    records.extend(depth[i * per..(i + 1) * per].iter().cloned());
                }
            } else {
                for p in &top {
                    records.extend(breadth.iter().find(|r| &r.policy == p).cloned());
                }
            }
            let ranking = rank_aggregated(&records, cfg.metric);
            let recommended = ranking[0].policy.clone();
            (candidates, records, ranking, recommended)
        }
        Strategy::Plateau {
            policies,
            start,
            config,
        } => {
            let records = par_map(cfg.search.workers, seeds.clone(), |seed| {
                change_lr_on_plateau(task, policies, *start, &cfg.search.train_config(seed), config)
            })?
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
            let recommended = rank_policies(&records, cfg.metric)[0].record.policy.clone();
            let ranking = rank_aggregated(&records, cfg.metric);
            (policies.clone(), records, ranking, recommended)
        }
    };
    Ok(TuningReport {
        task_id: task.id().to_string(),
        model_id: task.model_id().to_string(),
        strategy: strategy.clone(),
        config: cfg.clone(),
        candidates,
        records,
        ranking,
        recommended,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{load_task, TaskSpec};
    use crate::tuner::PolicyTemplate;

    #[test]
    fn grid_tuning_keeps_top_k() {
        let task = load_task(&TaskSpec::new("blobs2").with("n", 400)).unwrap();
        let space = SearchSpace {
            templates: vec![PolicyTemplate::Fix],
            lr_min: 0.001,
            lr_max: 0.1,
            points: 5,
        };
        let mut cfg = TuneConfig::new(OptimizerConfig::sgd(), 200, vec![1, 2]);
        cfg.top_k = 2;
        let report = tune(task.as_ref(), &Strategy::Grid { space }, &cfg).unwrap();
        assert_eq!(report.candidates.len(), 5);
        assert_eq!(report.records.len(), 4);
        assert_eq!(report.ranking.len(), 2);
        assert_eq!(report.recommended, report.ranking[0].policy);
        let again = tune(task.as_ref(), &report.strategy, &cfg).unwrap();
        assert_eq!(again.recommended, report.recommended);
    }
}
