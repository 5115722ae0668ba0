#![no_main]

use libfuzzer_sys::fuzz_target;
use structal::ie::RelationModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = RelationModel::from_bytes(data) {
        let mut out = Vec::new();
        model.write_to(&mut out).unwrap();
        RelationModel::from_bytes(&out).unwrap();
    }
});
