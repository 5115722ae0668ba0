#![no_main]

use libfuzzer_sys::fuzz_target;
use structal::learner::Model;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = Model::from_bytes(data) {
        let mut out = Vec::new();
        model.write_to(&mut out).unwrap();
        Model::from_bytes(&out).unwrap();
    }
});
