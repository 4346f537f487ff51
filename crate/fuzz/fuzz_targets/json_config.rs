#![no_main]

use genstat::config::ConfigFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(file) = ConfigFile::from_json(text) else {
        return;
    };
    let _ = file.scenario();
    let _ = file.sweep();
    // Whatever parses must survive a round trip through its own output.
    let echoed = serde_json::to_string(&file).expect("serializable");
    let again = ConfigFile::from_json(&echoed).expect("echo parses");
    assert_eq!(serde_json::to_string(&again).unwrap(), echoed);
});
