#![no_main]

use ideophone::EmbeddingTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = EmbeddingTable::from_reader(data, "fuzz") {
        assert!(table.dimension() > 0);
        assert!(!table.is_empty());
    }
});
