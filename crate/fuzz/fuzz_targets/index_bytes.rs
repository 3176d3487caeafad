#![no_main]

use ideophone::IdeophoneIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = IdeophoneIndex::from_bytes(data) {
        assert_eq!(index.to_bytes(), data);
    }
});
