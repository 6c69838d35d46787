use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::harness::{train, Schedule, Task, TrainConfig, TrialRecord};
use crate::optim::OptimizerConfig;
use crate::schedule::{CyclicKind, LrPolicy};

use super::range::LrGrid;
use super::{par_map, TunerError};

/// A policy shape whose rates are filled in by the search.
///
/// Single-rate templates take `k`; cyclic templates take `(k0, k1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyTemplate {
    Fix,
    Step {
        gamma: f64,
        l: u64,
    },
    #[serde(rename = "NSTEP")]
    NStep {
        gamma: f64,
        boundaries: Vec<u64>,
    },
    Exp {
        gamma: f64,
    },
    Inv {
        gamma: f64,
        p: f64,
    },
    Poly {
        p: f64,
    },
    Cyclic {
        kind: CyclicKind,
        l: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

impl PolicyTemplate {
    pub fn is_cyclic(&self) -> bool {
        matches!(self, PolicyTemplate::Cyclic { .. })
    }

    /// Fills in the rates. Single-rate templates use `k0` only.
    pub fn instantiate(&self, k0: f64, k1: f64) -> LrPolicy {
        let k = k0;
        match self {
            PolicyTemplate::Fix => LrPolicy::Fix { k },
            PolicyTemplate::Step { gamma, l } => LrPolicy::Step {
                k,
                gamma: *gamma,
                l: *l,
            },
            PolicyTemplate::NStep { gamma, boundaries } => LrPolicy::NStep {
                k,
                gamma: *gamma,
                boundaries: boundaries.clone(),
            },
            PolicyTemplate::Exp { gamma } => LrPolicy::Exp { k, gamma: *gamma },
            PolicyTemplate::Inv { gamma, p } => LrPolicy::Inv {
                k,
                gamma: *gamma,
                p: *p,
            },
            PolicyTemplate::Poly { p } => LrPolicy::Poly {
                k,
                p: *p,
                max_iter: None,
            },
            PolicyTemplate::Cyclic { kind, l, gamma } => LrPolicy::Cyclic {
                kind: *kind,
                k0,
                k1,
                l: *l,
                gamma: *gamma,
            },
        }
    }
}

/// Templates plus the learning-rate range they are searched over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub templates: Vec<PolicyTemplate>,
    pub lr_min: f64,
    pub lr_max: f64,
    /// Log-spaced rate values per axis for grid search.
    pub points: usize,
}

impl SearchSpace {
    fn check(&self) -> Result<(), TunerError> {
        if self.templates.is_empty() {
            return Err(TunerError::EmptyCandidates);
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return Err(TunerError::BadGrid(format!(
                "need 0 < lr_min <= lr_max, got [{}, {}]",
                self.lr_min, self.lr_max
            )));
        }
        if self.points == 0 {
            return Err(TunerError::BadGrid("points must be at least 1".into()));
        }
        Ok(())
    }

    /// Every template at every grid rate; cyclic templates at every ordered
    /// pair of distinct grid rates. A one-point grid uses `lr_min`, and a
    /// cyclic template then spans `[lr_min, lr_max]`.
    pub fn grid(&self) -> Result<Vec<LrPolicy>, TunerError> {
        self.check()?;
        let rates = if self.points == 1 || self.lr_min == self.lr_max {
            vec![self.lr_min]
        } else {
            LrGrid::log(self.lr_min, self.lr_max, self.points).values()?
        };
        let mut out = Vec::new();
        for tpl in &self.templates {
            if tpl.is_cyclic() {
                if rates.len() == 1 {
                    out.push(tpl.instantiate(self.lr_min, self.lr_max));
                }
                for (a, &lo) in rates.iter().enumerate() {
                    for &hi in &rates[a + 1..] {
                        out.push(tpl.instantiate(lo, hi));
                    }
                }
            } else {
                out.extend(rates.iter().map(|&k| tpl.instantiate(k, k)));
            }
        }
        Ok(out)
    }

    /// `n` candidates with a uniformly drawn template and log-uniform rates.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<LrPolicy>, TunerError> {
        self.check()?;
        if n == 0 {
            return Err(TunerError::EmptyCandidates);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (self.lr_min.ln(), self.lr_max.ln());
        let draw = |rng: &mut ChaCha8Rng| {
            if a == b {
                self.lr_min
            } else {
                rng.random_range(a..b).exp()
            }
        };
        Ok((0..n)
            .map(|_| {
                let tpl = &self.templates[rng.random_range(0..self.templates.len())];
                let (x, y) = (draw(&mut rng), draw(&mut rng));
                tpl.instantiate(x.min(y), x.max(y))
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub optimizer: OptimizerConfig,
    pub budget_iters: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<u64>,
    /// Concurrent trials.
    pub workers: usize,
}

impl SearchConfig {
    pub fn new(optimizer: OptimizerConfig, budget_iters: u64, seeds: Vec<u64>) -> Self {
        SearchConfig {
            optimizer,
            budget_iters,
            seeds,
            eval_every: None,
            workers: 1,
        }
    }

    pub(crate) fn train_config(&self, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(self.optimizer, self.budget_iters, seed);
        c.eval_every = self.eval_every;
        c
    }
}

/// One trial per candidate per seed, candidate-major. Candidates are
/// validated before anything runs.
pub fn run_candidates(
    task: &dyn Task,
    candidates: &[LrPolicy],
    cfg: &SearchConfig,
) -> Result<Vec<TrialRecord>, TunerError> {
    if candidates.is_empty() {
        return Err(TunerError::EmptyCandidates);
    }
    if cfg.seeds.is_empty() {
        return Err(TunerError::InvalidConfig("at least one seed is required".into()));
    }
    for p in candidates {
        p.validated(cfg.budget_iters)?;
    }
    let jobs: Vec<(&LrPolicy, u64)> = candidates
        .iter()
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    par_map(cfg.workers, jobs, |(p, seed)| {
        train(task, &cfg.train_config(seed), Schedule::Static(p))
    })?
    .into_iter()
    .map(|r| r.map_err(TunerError::from))
    .collect()
}

pub fn grid_search(task: &dyn Task, space: &SearchSpace, cfg: &SearchConfig) -> Result<Vec<TrialRecord>, TunerError> {
    run_candidates(task, &space.grid()?, cfg)
}

/// `n_samples` random candidates drawn with `sample_seed`.
pub fn random_search(
    task: &dyn Task,
    space: &SearchSpace,
    n_samples: usize,
    sample_seed: u64,
    cfg: &SearchConfig,
) -> Result<Vec<TrialRecord>, TunerError> {
    run_candidates(task, &space.sample(n_samples, sample_seed)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::QuadraticTask;

    fn space(templates: Vec<PolicyTemplate>, points: usize) -> SearchSpace {
        SearchSpace {
            templates,
            lr_min: 0.001,
            lr_max: 0.1,
            points,
        }
    }

    #[test]
    fn grid_enumeration() {
        let s = space(
            vec![
                PolicyTemplate::Fix,
                PolicyTemplate::Cyclic {
                    kind: CyclicKind::Tri,
                    l: 10,
                    gamma: None,
                },
            ],
            3,
        );
        let g = s.grid().unwrap();
        assert_eq!(g.len(), 3 + 3);
        assert_eq!(g[0], LrPolicy::fix(0.001));
        assert!(matches!(g[5], LrPolicy::Cyclic { k0, k1, .. } if (k0 - 0.01).abs() < 1e-15 && k1 == 0.1));
    }

    #[test]
    fn single_candidate_equals_train() {
        let task = QuadraticTask::new(2.0, 3);
        let cfg = SearchConfig::new(OptimizerConfig::sgd(), 40, vec![9]);
        let recs = grid_search(&task, &space(vec![PolicyTemplate::Fix], 1), &cfg).unwrap();
        assert_eq!(recs.len(), 1);
        let direct = train(&task, &cfg.train_config(9), Schedule::Static(&LrPolicy::fix(0.001))).unwrap();
        assert_eq!(recs[0].clone().without_timing(), direct.without_timing());
    }

    #[test]
    fn random_sampling() {
        let s = space(vec![PolicyTemplate::Fix, PolicyTemplate::Exp { gamma: 0.99 }], 3);
        assert!(matches!(s.sample(0, 1), Err(TunerError::EmptyCandidates)));
        let a = s.sample(20, 5).unwrap();
        assert_eq!(a, s.sample(20, 5).unwrap());
        for p in &a {
            let k = match p {
                LrPolicy::Fix { k } | LrPolicy::Exp { k, .. } => *k,
                _ => unreachable!(),
            };
            assert!((0.001..=0.1).contains(&k));
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let task = QuadraticTask::new(1.0, 4);
        let mut cfg = SearchConfig::new(OptimizerConfig::momentum(0.9), 30, vec![1, 2]);
        let s = space(vec![PolicyTemplate::Fix, PolicyTemplate::Poly { p: 1.2 }], 3);
        let one: Vec<_> = grid_search(&task, &s, &cfg).unwrap().into_iter().map(|r| r.without_timing()).collect();
        cfg.workers = 3;
        let many: Vec<_> = grid_search(&task, &s, &cfg).unwrap().into_iter().map(|r| r.without_timing()).collect();
        assert_eq!(one, many);
        assert_eq!(one.len(), 12);
    }
}
