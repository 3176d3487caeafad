#![no_main]

use ideophone::DetectionSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = DetectionSet::from_json(text) {
            let again = DetectionSet::from_json(&set.to_json()).expect("own output parses");
            assert_eq!(again, set);
        }
    }
});
