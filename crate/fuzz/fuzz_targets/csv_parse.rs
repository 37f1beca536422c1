#![no_main]
use hepflow::csv::{parse_csv, to_csv_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(store) = parse_csv(text, None) {
        // Whatever parses must survive a write/read cycle with the same shape.
        let again = parse_csv(&to_csv_string(&store), Some(store.schema())).expect("re-parse");
        assert_eq!(again.len(), store.len());
        assert_eq!(again.schema(), store.schema());
    }
});
