#![no_main]

use libfuzzer_sys::fuzz_target;
use mfc_harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // any accepted document must survive validation and a round trip
        if let Ok(cfg) = ExperimentConfig::from_toml(text) {
            let again = toml::to_string(&cfg).expect("accepted config serializes");
            assert_eq!(ExperimentConfig::from_toml(&again).expect("round trip parses"), cfg);
        }
    }
});
