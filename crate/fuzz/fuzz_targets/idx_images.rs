#![no_main]

use libfuzzer_sys::fuzz_target;
use lrkit::harness::idx::{encode_idx_images, parse_idx_images};

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        let bytes = encode_idx_images(&images);
        assert_eq!(parse_idx_images(&bytes).expect("re-encoded images parse"), images);
    }
});
