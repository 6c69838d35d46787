//! Every checked-in fuzz seed must parse and round-trip.

use std::fs;
use std::path::PathBuf;

use lrkit::db::parse_db_lines;
use lrkit::harness::idx::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels};
use lrkit::harness::parse_task_spec;
use lrkit::schedule::{parse_policy, serialize_policy};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn policy_seeds_round_trip() {
    for (path, bytes) in seeds("policy_json") {
        let text = String::from_utf8(bytes).unwrap();
        let p = parse_policy(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_policy(&serialize_policy(&p)).unwrap(), p);
    }
}

#[test]
fn idx_image_seeds_round_trip() {
    for (path, bytes) in seeds("idx_images") {
        let images = parse_idx_images(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(encode_idx_images(&images), bytes);
    }
}

#[test]
fn idx_label_seeds_round_trip() {
    for (path, bytes) in seeds("idx_labels") {
        let labels = parse_idx_labels(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(encode_idx_labels(&labels), bytes);
    }
}

#[test]
fn db_seeds_parse() {
    let mut total = 0;
    for (path, bytes) in seeds("db_lines") {
        let text = String::from_utf8(bytes).unwrap();
        total += parse_db_lines(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display())).len();
    }
    assert!(total > 0);
}

#[test]
fn task_spec_seeds_round_trip() {
    for (path, bytes) in seeds("task_spec") {
        let text = String::from_utf8(bytes).unwrap();
        let spec = parse_task_spec(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_task_spec(&spec.to_string()).unwrap(), spec);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(parse_policy("{\"type\":\"FIX\"}").is_err());
    assert!(parse_policy("[]").is_err());
    assert!(parse_idx_images(&[0, 0, 8, 3, 0, 0, 0, 1]).is_err());
    assert!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 2, 7]).is_err());
    assert!(parse_db_lines("{\"schema_version\":1}\n{\"id\":").is_err());
    assert!(parse_db_lines("{\"schema_version\":99}\n").is_err());
    assert!(parse_task_spec("blobs2(n=1").is_err());
    assert!(parse_task_spec("blobs2(n=1,n=2)").is_err());
}
