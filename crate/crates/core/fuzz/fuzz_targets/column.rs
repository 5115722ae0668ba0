#![no_main]

use libfuzzer_sys::fuzz_target;
use structal::corpus::{read_column_tagging, ColumnOptions, TaskKind};

fuzz_target!(|data: &[u8]| {
    for strict in [false, true] {
        if let Ok(corpus) = read_column_tagging(data, "fuzz", ColumnOptions { strict }) {
            for s in &corpus.sentences {
                let _ = s.validate(TaskKind::Tagging);
            }
        }
    }
});
