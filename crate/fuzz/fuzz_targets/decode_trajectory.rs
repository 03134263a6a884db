#![no_main]

use libfuzzer_sys::fuzz_target;
use vorticity_bsde::checkpoint::{decode_trajectory, encode_trajectory};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_trajectory(data) {
        assert_eq!(encode_trajectory(&t.fields, t.dt, t.nu).unwrap(), data);
        let _ = t.clone().into_iterate(0, 0.0);
        let _ = t.into_trajectory();
    }
});
