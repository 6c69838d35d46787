use lrkit::harness::{load_task, TaskSpec};
use lrkit::optim::OptimizerConfig;
use lrkit::tuner::{
    grid_search, lr_range_test, rank_aggregated, tune, LrGrid, PolicyTemplate, RangeTestConfig, RankMetric,
    SearchConfig, SearchSpace, Strategy, TuneConfig,
};

#[test]
fn range_test_narrows_the_search_interval() {
    let task = load_task(&TaskSpec::new("blobs2")).unwrap();
    let cfg = RangeTestConfig {
        grid: LrGrid::log(1e-4, 1.0, 13),
        budgets: vec![1, 3],
        optimizer: OptimizerConfig::sgd(),
        seed: 0,
        workers: 1,
    };
    let r = lr_range_test(task.as_ref(), &cfg).unwrap();
    let (lo, hi) = r.recommended;
    assert!(lo <= r.argmax_lr() && r.argmax_lr() <= hi, "{lo} {hi} {}", r.argmax_lr());
    assert!(r.width_decades() <= 1.5, "width {}", r.width_decades());
    assert!(r.volume_reduction(1e-4, 1.0) >= 0.9, "reduction {}", r.volume_reduction(1e-4, 1.0));
    assert_eq!(r.to_csv().lines().count(), 1 + 13 * 2);

    let again = lr_range_test(task.as_ref(), &cfg).unwrap();
    assert_eq!(r, again);
}

#[test]
fn grid_search_over_fixed_rates_is_reproducible() {
    let task = load_task(&TaskSpec::new("blobs2").with("n", 400)).unwrap();
    let space = SearchSpace {
        templates: vec![PolicyTemplate::Fix],
        lr_min: 0.0005,
        lr_max: 0.006,
        points: 3,
    };
    let mut cfg = SearchConfig::new(OptimizerConfig::sgd(), 300, vec![0, 1]);
    cfg.eval_every = Some(50);
    let a = grid_search(task.as_ref(), &space, &cfg).unwrap();
    cfg.workers = 2;
    let b = grid_search(task.as_ref(), &space, &cfg).unwrap();
    assert_eq!(a.len(), 6);
    let strip = |v: Vec<lrkit::harness::TrialRecord>| v.into_iter().map(|r| r.without_timing()).collect::<Vec<_>>();
    assert_eq!(strip(a.clone()), strip(b));

    let ranked = rank_aggregated(&a, RankMetric::PeakTop1);
    assert_eq!(ranked.len(), 3);
}

#[test]
fn tune_reports_are_deterministic() {
    let task = load_task(&TaskSpec::new("moons2").with("n", 400)).unwrap();
    let strategy = Strategy::Random {
        space: SearchSpace {
            templates: vec![
                PolicyTemplate::Fix,
                PolicyTemplate::Cyclic {
                    kind: lrkit::schedule::CyclicKind::Tri2,
                    l: 50,
                    gamma: None,
                },
            ],
            lr_min: 0.001,
            lr_max: 0.5,
            points: 3,
        },
        samples: 4,
        sample_seed: 7,
    };
    let cfg = TuneConfig::new(OptimizerConfig::sgd(), 200, vec![0, 1]);
    let a = tune(task.as_ref(), &strategy, &cfg).unwrap();
    let b = tune(task.as_ref(), &strategy, &cfg).unwrap();
    assert_eq!(a.candidates.len(), 4);
    assert_eq!(a.recommended, b.recommended);
    assert_eq!(a.ranking, b.ranking);
}
