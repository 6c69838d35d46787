#![no_main]

use libfuzzer_sys::fuzz_target;
use lrkit::harness::parse_task_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = parse_task_spec(text) {
            let _ = spec.to_string();
        }
    }
});
