#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(sweep) = genstat::config::parse_sweep(text) {
        assert!(!sweep.values.is_empty());
        for &v in sweep.values.iter().take(16) {
            let _ = sweep.base.with_parameter(sweep.parameter, v);
        }
    }
});
