use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use lrkit::db::{DbKey, PolicyDb};
use lrkit::harness::{load_task, parse_task_spec, train, Schedule, Task, TrainConfig};
use lrkit::optim::{OptimizerConfig, OptimizerKind};
use lrkit::schedule::{parse_policy, schedule_series, serialize_policy, CyclicKind, LrPolicy};
use lrkit::tuner::{
    lr_range_test, tune, LrGrid, Monitored, PlateauConfig, PolicyTemplate, RangeTestConfig, RankMetric, SearchSpace,
    Strategy, TuneConfig, TunerError,
};
use lrkit::verifier::{m_opt_trace, mopt_csv, verify_policy, VerifyConfig};

use crate::args::{
    Cli, Command, DbCommand, EvalArgs, KeyArgs, MoptArgs, MonitorArg, OptimizerArg, OptimizerArgs, RangeTestArgs,
    StrategyArg, TrainArgs, TuneArgs, VerifyArgs,
};
use crate::output::{json_text, write, write_json_and_csv};
use crate::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Eval(a) => eval(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::RangeTest(a) => range_test(cli, a),
        Command::Tune(a) => tune_cmd(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Mopt(a) => mopt(cli, a),
        Command::Db(c) => db(cli, c),
    }
}

fn read_policy(flag: &'static str, path: &Path) -> Result<LrPolicy, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(flag, format!("{}: {e}", path.display())))?;
    parse_policy(&text).map_err(|e| CliError::usage(flag, format!("{}: {e}", path.display())))
}

fn read_task(spec: &str) -> Result<Arc<dyn Task>, CliError> {
    let spec = parse_task_spec(spec).map_err(|e| CliError::usage("task", e))?;
    load_task(&spec).map_err(|e| CliError::usage("task", e))
}

fn optimizer(a: &OptimizerArgs) -> OptimizerConfig {
    let kind = match a.optimizer {
        OptimizerArg::Sgd => OptimizerKind::Sgd,
        OptimizerArg::Momentum => OptimizerKind::Momentum,
        OptimizerArg::Adam => OptimizerKind::Adam,
    };
    OptimizerConfig {
        kind,
        momentum: a.momentum,
        beta1: a.beta1,
        beta2: a.beta2,
        eps: a.eps,
    }
}

fn seeds(base: u64, repeats: u64) -> Result<Vec<u64>, CliError> {
    if repeats == 0 {
        return Err(CliError::usage("repeats", "must be at least 1"));
    }
    Ok((0..repeats).map(|i| base.wrapping_add(i)).collect())
}

fn metric(text: &str) -> Result<RankMetric, CliError> {
    text.parse().map_err(|e| CliError::usage("metric", e))
}

fn open_db(cli: &Cli) -> Result<Option<PolicyDb>, CliError> {
    cli.db
        .as_ref()
        .map(|p| PolicyDb::open(p).map_err(CliError::failed))
        .transpose()
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<(), CliError> {
    let policy = read_policy("policy", &a.policy)?;
    if a.iters == 0 {
        return Err(CliError::usage("iters", "must be at least 1"));
    }
    if a.stride == 0 {
        return Err(CliError::usage("stride", "must be at least 1"));
    }
    let series = schedule_series(&policy, a.iters, a.stride).map_err(|e| CliError::usage("policy", e))?;
    write(cli.out.as_deref(), &series.to_csv())
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<(), CliError> {
    let task = read_task(&a.task)?;
    let policy = read_policy("policy", &a.policy)?;
    if a.iters == 0 {
        return Err(CliError::usage("iters", "must be at least 1"));
    }
    if a.eval_every == Some(0) {
        return Err(CliError::usage("eval-every", "must be at least 1"));
    }
    policy.validated(a.iters).map_err(|e| CliError::usage("policy", e))?;
    let mut cfg = TrainConfig::new(optimizer(&a.optimizer), a.iters, cli.seed);
    cfg.eval_every = a.eval_every;
    let record = train(task.as_ref(), &cfg, Schedule::Static(&policy)).map_err(CliError::failed)?;
    write_json_and_csv(cli.out.as_deref(), &record, &record.to_csv(), cli.stable_output)?;
    if let Some(mut db) = open_db(cli)? {
        db.put_record(record.clone()).map_err(CliError::failed)?;
    }
    if record.diverged {
        return Err(CliError::Domain(format!("trial diverged at iteration {}", record.iters_run)));
    }
    Ok(())
}

fn range_config(a: &RangeTestArgs, seed: u64, workers: usize) -> RangeTestConfig {
    RangeTestConfig {
        grid: LrGrid {
            lo: a.lr_min,
            hi: a.lr_max,
            points: a.points,
            log_spaced: !a.linear,
        },
        budgets: a.budgets.clone(),
        optimizer: optimizer(&a.optimizer),
        seed,
        workers,
    }
}

fn tuner_error(e: TunerError) -> CliError {
    match e {
        TunerError::AllDiverged => CliError::Domain(e.to_string()),
        TunerError::BadGrid(_) => CliError::usage("lr-min", e),
        TunerError::NoAccuracy(_) => CliError::usage("task", e),
        other => CliError::failed(other),
    }
}

fn range_test(cli: &Cli, a: &RangeTestArgs) -> Result<(), CliError> {
    let task = read_task(&a.task)?;
    if a.points < 4 {
        return Err(CliError::usage("points", "a range test needs at least 4 points"));
    }
    if a.budgets.is_empty() || a.budgets.contains(&0) {
        return Err(CliError::usage("budgets", "epoch budgets must be positive"));
    }
    let result = lr_range_test(task.as_ref(), &range_config(a, cli.seed, cli.workers)).map_err(tuner_error)?;
    match cli.out.as_deref() {
        Some(out) => write_json_and_csv(Some(out), &result, &result.to_csv(), cli.stable_output),
        None => write(None, &result.to_csv()),
    }
}

fn template(name: &str, budget: u64, cycle_len: u64) -> Result<PolicyTemplate, CliError> {
    let decay_to_tenth = 0.1f64.powf(1.0 / budget as f64);
    let t = match name.to_ascii_lowercase().as_str() {
        "fix" => PolicyTemplate::Fix,
        "step" => PolicyTemplate::Step {
            gamma: 0.5,
            l: (budget / 4).max(1),
        },
        "nstep" => PolicyTemplate::NStep {
            gamma: 0.1,
            boundaries: vec![(budget / 2).max(1), (budget * 3 / 4).max(2)],
        },
        "exp" => PolicyTemplate::Exp { gamma: decay_to_tenth },
        "inv" => PolicyTemplate::Inv { gamma: 1e-4, p: 0.75 },
        "poly" => PolicyTemplate::Poly { p: 1.2 },
        other => {
            let kind = CyclicKind::from_name(&other.to_ascii_uppercase())
                .ok_or_else(|| CliError::usage("templates", format!("unknown template {name:?}")))?;
            PolicyTemplate::Cyclic {
                kind,
                l: cycle_len,
                gamma: kind.needs_gamma().then_some(decay_to_tenth),
            }
        }
    };
    Ok(t)
}

fn tune_cmd(cli: &Cli, a: &TuneArgs) -> Result<(), CliError> {
    let task = read_task(&a.task)?;
    if a.budget == 0 {
        return Err(CliError::usage("budget", "must be at least 1"));
    }
    if a.top == 0 {
        return Err(CliError::usage("top", "must be at least 1"));
    }
    let opt = optimizer(&a.optimizer);
    let metric = metric(&a.metric)?;
    let (lr_min, lr_max) = match (a.lr_min, a.lr_max) {
        (Some(lo), Some(hi)) => (lo, hi),
        (None, None) if a.strategy == StrategyArg::Plateau && !a.candidates.is_empty() => (0.0, 0.0),
        (None, None) => {
            if !task.has_accuracy() {
                return Err(CliError::usage(
                    "lr-min",
                    "--lr-min and --lr-max are required for tasks without accuracy",
                ));
            }
            let rt = lr_range_test(
                task.as_ref(),
                &RangeTestConfig {
                    grid: LrGrid::log(1e-4, 1.0, 9),
                    budgets: vec![1],
                    optimizer: opt,
                    seed: cli.seed,
                    workers: cli.workers,
                },
            )
            .map_err(tuner_error)?;
            eprintln!("range test recommends [{}, {}]", rt.recommended.0, rt.recommended.1);
            rt.recommended
        }
        _ => return Err(CliError::usage("lr-max", "give both --lr-min and --lr-max or neither")),
    };
    let cycle_len = a.cycle_len.unwrap_or((a.budget / 8).max(1));
    let space = || -> Result<SearchSpace, CliError> {
        Ok(SearchSpace {
            templates: a
                .templates
                .iter()
                .map(|n| template(n, a.budget, cycle_len))
                .collect::<Result<_, _>>()?,
            lr_min,
            lr_max,
            points: a.points,
        })
    };
    let strategy = match a.strategy {
        StrategyArg::Grid => Strategy::Grid { space: space()? },
        StrategyArg::Random => Strategy::Random {
            space: space()?,
            samples: a.samples,
            sample_seed: cli.seed,
        },
        StrategyArg::Plateau => {
            let policies = if a.candidates.is_empty() {
                vec![
                    LrPolicy::fix(lr_max),
                    LrPolicy::fix((lr_min * lr_max).sqrt()),
                    LrPolicy::fix(lr_min),
                ]
            } else {
                a.candidates
                    .iter()
                    .map(|p| read_policy("candidate", p))
                    .collect::<Result<_, _>>()?
            };
            let start = a.start.unwrap_or(policies.len() / 2);
            Strategy::Plateau {
                policies,
                start,
                config: PlateauConfig {
                    patience: a.patience,
                    min_delta: a.min_delta,
                    monitored: match a.monitor {
                        MonitorArg::TrainLoss => Monitored::TrainLoss,
                        MonitorArg::ValLoss => Monitored::ValLoss,
                    },
                    warmup: a.warmup,
                    phase_split: a.phase_split,
                },
            }
        }
    };
    let mut cfg = TuneConfig::new(opt, a.budget, seeds(cli.seed, a.repeats)?);
    cfg.search.workers = cli.workers;
    cfg.search.eval_every = a.eval_every;
    cfg.top_k = a.top;
    cfg.metric = metric;
    let report = tune(task.as_ref(), &strategy, &cfg).map_err(|e| match e {
        TunerError::InvalidStartIndex { .. } => CliError::usage("start", e),
        TunerError::OrderingViolation { .. } => CliError::usage("candidate", e),
        TunerError::EmptyCandidates => CliError::usage("samples", e),
        other => tuner_error(other),
    })?;
    write(cli.out.as_deref(), &json_text(&report, cli.stable_output)?)?;
    if let Some(mut db) = open_db(cli)? {
        for r in &report.records {
            db.put_record(r.clone()).map_err(CliError::failed)?;
        }
    }
    if report.records.iter().all(|r| r.diverged) {
        return Err(CliError::Domain("every tuning trial diverged".into()));
    }
    Ok(())
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<(), CliError> {
    let task = read_task(&a.task)?;
    let policy = read_policy("policy", &a.policy)?;
    if !(0.0..=1.0).contains(&a.target_acc) {
        return Err(CliError::usage("target-acc", "must lie in [0, 1]"));
    }
    if a.top == 0 {
        return Err(CliError::usage("top", "must be at least 1"));
    }
    if a.budget == 0 {
        return Err(CliError::usage("budget", "must be at least 1"));
    }
    policy.validated(a.budget).map_err(|e| CliError::usage("policy", e))?;
    let db = open_db(cli)?.unwrap_or_else(PolicyDb::in_memory);
    let mut cfg = VerifyConfig::new(a.target_acc, a.budget, seeds(cli.seed, a.repeats)?, optimizer(&a.optimizer));
    cfg.top_n = a.top;
    cfg.workers = cli.workers;
    cfg.eval_every = a.eval_every;
    let verdict = verify_policy(&policy, task.as_ref(), &cfg, &db).map_err(CliError::failed)?;
    write(cli.out.as_deref(), &json_text(&verdict, cli.stable_output)?)?;
    if !verdict.verified {
        return Err(CliError::Domain(format!(
            "policy missed the target top-1 {} (mean peak {})",
            a.target_acc, verdict.candidate_score
        )));
    }
    Ok(())
}

fn mopt(cli: &Cli, a: &MoptArgs) -> Result<(), CliError> {
    let task = read_task(&a.task)?;
    let policy = read_policy("policy", &a.policy)?;
    if a.m == 0 {
        return Err(CliError::usage("M", "must be at least 1"));
    }
    if a.iters < a.m.saturating_mul(3) {
        return Err(CliError::usage("iters", "must be at least 3M"));
    }
    policy.validated(a.iters).map_err(|e| CliError::usage("policy", e))?;
    let trace = m_opt_trace(task.as_ref(), &policy, optimizer(&a.optimizer), a.iters, a.m, cli.seed)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    write(cli.out.as_deref(), &mopt_csv(&trace))
}

fn key_matches(k: &KeyArgs, key: &DbKey) -> bool {
    k.dataset.as_ref().is_none_or(|d| d == &key.dataset_id)
        && k.model.as_ref().is_none_or(|m| m == &key.model_id)
        && k.optimizer_id.as_ref().is_none_or(|o| o == &key.optimizer_id)
}

fn db(cli: &Cli, c: &DbCommand) -> Result<(), CliError> {
    let path = cli
        .db
        .as_ref()
        .ok_or_else(|| CliError::usage("db", "the db subcommands need --db <path>"))?;
    let mut db = PolicyDb::open(path).map_err(CliError::failed)?;
    match c {
        DbCommand::List { key, json } => {
            let rows: Vec<_> = db.records().iter().filter(|r| key_matches(key, &r.key)).collect();
            if *json {
                return write(cli.out.as_deref(), &json_text(&rows, true)?);
            }
            let mut out = String::from("id\tdataset\tmodel\toptimizer\tseed\tpeak_top1\tfinal_loss\tpolicy\n");
            for r in rows {
                let peak = r.record.peak_top1.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.id,
                    r.key.dataset_id,
                    r.key.model_id,
                    r.key.optimizer_id,
                    r.record.seed,
                    peak,
                    r.record.final_loss,
                    serialize_policy(&r.record.policy)
                );
            }
            write(cli.out.as_deref(), &out)
        }
        DbCommand::Top { key, metric: m, n, json } => {
            if *n == 0 {
                return Err(CliError::usage("n", "must be at least 1"));
            }
            let m = metric(m)?;
            let full = |v: &Option<String>, flag: &'static str| {
                v.clone()
                    .ok_or_else(|| CliError::usage(flag, "db top needs --dataset, --model and --optimizer-id"))
            };
            let k = DbKey::new(
                full(&key.dataset, "dataset")?,
                full(&key.model, "model")?,
                full(&key.optimizer_id, "optimizer-id")?,
            );
            let top = db.top_n(&k, m, *n);
            if *json {
                return write(cli.out.as_deref(), &json_text(&top, true)?);
            }
            let mut out = format!("rank\t{m}\ttrials\tpolicy\n");
            for (i, s) in top.iter().enumerate() {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", i + 1, s.score, s.trials, serialize_policy(&s.policy));
            }
            write(cli.out.as_deref(), &out)
        }
        DbCommand::Import { file } => {
            let n = db.import(file).map_err(CliError::failed)?;
            eprintln!("imported {n} records");
            Ok(())
        }
        DbCommand::Export { file } => {
            let n = db.export(file).map_err(CliError::failed)?;
            eprintln!("exported {n} records");
            Ok(())
        }
    }
}
