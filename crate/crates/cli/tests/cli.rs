use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrkit::harness::{load_task, TaskSpec};
use lrkit::optim::OptimizerConfig;
use lrkit::schedule::LrPolicy;
use lrkit::tuner::{tune, Monitored, PlateauConfig, Strategy, TuneConfig};
use serde_json::Value;

fn lrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrkit"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_policy(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const HELP_PAGES: &[&[&str]] = &[
    &[],
    &["eval"],
    &["train"],
    &["range-test"],
    &["tune"],
    &["verify"],
    &["mopt"],
    &["db"],
    &["db", "list"],
    &["db", "top"],
    &["db", "import"],
    &["db", "export"],
];

#[test]
fn help_pages_match_golden_files() {
    let bless = std::env::var_os("LRKIT_BLESS").is_some();
    for page in HELP_PAGES {
        let mut args: Vec<&str> = page.to_vec();
        args.push("--help");
        let o = lrkit(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        let name = if page.is_empty() { "lrkit".to_string() } else { format!("lrkit-{}", page.join("-")) };
        let path = golden_dir().join(format!("{name}.txt"));
        if bless {
            fs::write(&path, &o.stdout).unwrap();
        }
        let expected = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e}; rerun with LRKIT_BLESS=1", path.display()));
        assert_eq!(stdout(&o), expected, "help for {args:?} changed; rerun with LRKIT_BLESS=1");
    }
}

#[test]
fn eval_tabulates_a_fixed_policy() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_policy(dir.path(), "fix.json", r#"{"type":"FIX","k":0.01}"#);
    let o = lrkit(&["eval", "--policy", &p, "--iters", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "t,lr\n0,0.01\n1,0.01\n2,0.01\n");
}

#[test]
fn exit_codes_separate_usage_and_domain_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_policy(dir.path(), "fix.json", r#"{"type":"FIX","k":0.01}"#);
    let bad = write_policy(dir.path(), "bad.json", r#"{"type":"FIX"}"#);

    assert_eq!(lrkit(&["eval", "--policy", &p, "--iters", "0"]).status.code(), Some(2));
    assert_eq!(lrkit(&["eval", "--policy", &bad, "--iters", "5"]).status.code(), Some(2));
    assert_eq!(lrkit(&["eval", "--iters", "5"]).status.code(), Some(2));
    assert_eq!(lrkit(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(lrkit(&["train", "--task", "nope", "--policy", &p, "--iters", "5"]).status.code(), Some(2));

    let missed = lrkit(&[
        "verify", "--policy", &p, "--task", "blobs2(n=200)", "--target-acc", "0.99", "--budget", "50",
    ]);
    assert_eq!(missed.status.code(), Some(1));
    let verdict: Value = serde_json::from_slice(&missed.stdout).unwrap();
    assert_eq!(verdict["verified"], Value::Bool(false));

    let met = lrkit(&[
        "verify", "--policy", &p, "--task", "blobs2(n=200)", "--target-acc", "0.0", "--budget", "50",
    ]);
    assert_eq!(met.status.code(), Some(0));
}

#[test]
fn stable_output_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_policy(dir.path(), "tri.json", r#"{"type":"TRI","k0":0.01,"k1":0.3,"l":20}"#);
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = lrkit(&[
            "--stable-output",
            "--out",
            out.to_str().unwrap(),
            "train",
            "--task",
            "moons2(n=300)",
            "--policy",
            &p,
            "--iters",
            "120",
            "--eval-every",
            "20",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(&out).unwrap(), fs::read(out.with_extension("csv")).unwrap())
    };
    let a = run("a.json");
    let b = run("b.json");
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a.0).unwrap();
    assert!(v.get("metadata").is_none());

    let tune = |out: &str| {
        let out = dir.path().join(out);
        let o = lrkit(&[
            "--stable-output", "--out", out.to_str().unwrap(), "tune", "--task", "blobs2(n=200)", "--budget", "60",
            "--lr-min", "0.001", "--lr-max", "0.1", "--points", "2", "--repeats", "2",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(&out).unwrap()
    };
    assert_eq!(tune("t1.json"), tune("t2.json"));
}

#[test]
fn plateau_tuning_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let docs = [
        r#"{"type":"FIX","k":0.2}"#,
        r#"{"type":"FIX","k":0.02}"#,
        r#"{"type":"FIX","k":0.002}"#,
    ];
    let files: Vec<String> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| write_policy(dir.path(), &format!("c{i}.json"), d))
        .collect();
    let mut args = vec![
        "--stable-output", "tune", "--task", "blobs2(n=400)", "--strategy", "plateau", "--budget", "400",
        "--eval-every", "10", "--patience", "3", "--min-delta", "0.1", "--start", "1", "--repeats", "2",
    ];
    for f in &files {
        args.push("--candidate");
        args.push(f);
    }
    let o = lrkit(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();

    let task = load_task(&TaskSpec::new("blobs2").with("n", 400)).unwrap();
    let strategy = Strategy::Plateau {
        policies: vec![LrPolicy::fix(0.2), LrPolicy::fix(0.02), LrPolicy::fix(0.002)],
        start: 1,
        config: PlateauConfig {
            patience: 3,
            min_delta: 0.1,
            monitored: Monitored::TrainLoss,
            warmup: 0,
            phase_split: 0.7,
        },
    };
    let mut cfg = TuneConfig::new(OptimizerConfig::sgd(), 400, vec![0, 1]);
    cfg.search.eval_every = Some(10);
    let lib = tune(task.as_ref(), &strategy, &cfg).unwrap();
    assert_eq!(report["recommended"], serde_json::to_value(&lib.recommended).unwrap());
    assert_eq!(report["ranking"], serde_json::to_value(&lib.ranking).unwrap());
}

#[test]
fn db_export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("a.jsonl");
    let db2 = dir.path().join("b.jsonl");
    let export = dir.path().join("export.jsonl");
    let db_s = db.to_str().unwrap();
    let p = write_policy(dir.path(), "fix.json", r#"{"type":"FIX","k":0.05}"#);
    for seed in ["0", "1"] {
        let o = lrkit(&[
            "--db", db_s, "--seed", seed, "train", "--task", "blobs2(n=200)", "--policy", &p, "--iters", "60",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(lrkit(&["--db", db_s, "db", "export", export.to_str().unwrap()]).status.code(), Some(0));
    let db2_s = db2.to_str().unwrap();
    assert_eq!(lrkit(&["--db", db2_s, "db", "import", export.to_str().unwrap()]).status.code(), Some(0));

    let list = |path: &str| -> Value {
        let o = lrkit(&["--db", path, "db", "list", "--json"]);
        assert_eq!(o.status.code(), Some(0));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let (a, b) = (list(db_s), list(db2_s));
    let strip = |v: &Value| -> Vec<Value> { v.as_array().unwrap().iter().map(|r| r["record"].clone()).collect() };
    assert_eq!(strip(&a).len(), 2);
    assert_eq!(strip(&a), strip(&b));

    let top = lrkit(&[
        "--db", db2_s, "db", "top", "--dataset", a[0]["key"]["dataset_id"].as_str().unwrap(), "--model",
        a[0]["key"]["model_id"].as_str().unwrap(), "--optimizer-id", a[0]["key"]["optimizer_id"].as_str().unwrap(),
    ]);
    assert_eq!(top.status.code(), Some(0));
    assert_eq!(stdout(&top).lines().count(), 2);

    fs::write(&export, "{\"schema_version\":1}\n{\"id\":\n").unwrap();
    assert_eq!(lrkit(&["--db", db2_s, "db", "import", export.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(strip(&list(db2_s)).len(), 2);
    assert_eq!(lrkit(&["db", "list"]).status.code(), Some(2));
}
