#![no_main]
use hepflow_cli::model::read_fit_result;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(record) = read_fit_result(text) {
        assert!(record.values.iter().all(|(_, v)| v.is_finite()));
    }
});
