#![no_main]

use libfuzzer_sys::fuzz_target;
use structal::corpus::{read_conllu, write_conllu};

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = read_conllu(data, "fuzz") {
        // Anything accepted must survive a write/read cycle.
        let mut out = Vec::new();
        write_conllu(&corpus, &mut out).unwrap();
        let again = read_conllu(out.as_slice(), "roundtrip").unwrap();
        assert_eq!(again.sentences.len(), corpus.sentences.len());
    }
});
