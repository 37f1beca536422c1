#![no_main]
use hepflow_cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(entries) = parse_config(text) {
        for (key, _) in &entries {
            assert!(!key.is_empty() && !key.contains('_'));
        }
    }
});
