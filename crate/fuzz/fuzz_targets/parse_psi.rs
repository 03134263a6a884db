#![no_main]

use libfuzzer_sys::fuzz_target;
use vbsde_cli::psi::{parse_psi, psi_field};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(terms) = parse_psi(text) {
            let _ = psi_field(&terms, 16);
        }
    }
});
