#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(scenario) = genstat::config::parse_scenario(text) {
        // A validated scenario must yield a grid and a barrier setting.
        scenario.grid().expect("validated grid");
        let _ = scenario.barrier_setting();
    }
});
