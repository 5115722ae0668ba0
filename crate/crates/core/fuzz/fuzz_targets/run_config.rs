#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use structal::config::parse_run_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_run_config(text, "fuzz", Path::new("/nonexistent"));
});
