#![no_main]

use libfuzzer_sys::fuzz_target;
use lrkit::schedule::{eval_lr, parse_policy, serialize_policy};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(policy) = parse_policy(text) {
        let again = parse_policy(&serialize_policy(&policy)).expect("serialized policy parses");
        assert_eq!(policy, again);
        for t in [0, 1, 7, 100, 999] {
            let _ = eval_lr(&policy, t, 1000);
        }
    }
});
