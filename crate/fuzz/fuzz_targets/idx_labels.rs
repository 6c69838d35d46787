#![no_main]

use libfuzzer_sys::fuzz_target;
use lrkit::harness::idx::{encode_idx_labels, parse_idx_labels};

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_idx_labels(data) {
        assert_eq!(parse_idx_labels(&encode_idx_labels(&labels)).unwrap(), labels);
    }
});
