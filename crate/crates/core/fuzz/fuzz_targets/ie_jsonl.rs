#![no_main]

use libfuzzer_sys::fuzz_target;
use structal::ie::{parse_ie_jsonl, to_ie_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(corpus) = parse_ie_jsonl(text, "fuzz") {
        let again = parse_ie_jsonl(&to_ie_jsonl(&corpus), "roundtrip").unwrap();
        assert_eq!(again.sentences.len(), corpus.sentences.len());
    }
});
