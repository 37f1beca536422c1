#![no_main]
use hepflow_cli::values::{parse_assignments, parse_counts, parse_names, parse_range, parse_reals};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(v) = parse_reals(text) {
        assert!(v.iter().all(|x| x.is_finite()));
    }
    if let Ok(v) = parse_counts(text) {
        assert!(v.iter().all(|&n| n > 0));
    }
    if let Ok((lo, hi)) = parse_range(text) {
        assert!(lo < hi);
    }
    let _ = parse_assignments(text);
    let _ = parse_names(text);
});
