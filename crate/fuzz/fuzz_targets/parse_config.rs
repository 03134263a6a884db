#![no_main]

use libfuzzer_sys::fuzz_target;
use vbsde_cli::config::{parse_config, salvage_output_dir};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = salvage_output_dir(text);
        if let Ok(cfg) = parse_config(text) {
            cfg.psi().expect("validated terminal data builds");
        }
    }
});
