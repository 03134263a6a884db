#![no_main]

use libfuzzer_sys::fuzz_target;
use vorticity_bsde::checkpoint::{decode_field, encode_field};

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = decode_field(data) {
        // accepted records re-encode to the same bytes
        assert_eq!(encode_field(&f), data);
    }
});
