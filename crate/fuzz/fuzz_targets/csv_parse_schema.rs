#![no_main]
use hepflow::csv::{parse_csv, to_csv_string};
use hepflow::store::{ColumnKind, ColumnSchema};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&mask, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let kinds = [ColumnKind::Real64, ColumnKind::Integer64, ColumnKind::Boolean];
    let n = 1 + (mask as usize & 3) % 3;
    let schema = ColumnSchema::new((0..n).map(|i| (format!("c{i}"), kinds[(mask as usize >> (2 + 2 * i) & 3) % 3]))).unwrap();
    if let Ok(store) = parse_csv(text, Some(&schema)) {
        let again = parse_csv(&to_csv_string(&store), Some(&schema)).expect("re-parse");
        assert_eq!(again.len(), store.len());
    }
});
