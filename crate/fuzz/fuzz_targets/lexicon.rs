#![no_main]

use ideophone::lexicon::parse_lexicon_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(entries) = parse_lexicon_str(text) {
            for e in &entries {
                assert!(!e.display_form().is_empty());
            }
        }
    }
});
