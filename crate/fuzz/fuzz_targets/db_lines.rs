#![no_main]

use libfuzzer_sys::fuzz_target;
use lrkit::db::parse_db_lines;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_db_lines(text);
    }
});
