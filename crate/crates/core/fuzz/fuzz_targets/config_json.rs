#![no_main]

use cmab::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::from_json(text) {
        // A config that validates must also resolve its means and seeds.
        let _ = config.means().unwrap();
        let _ = config.warnings();
        let echoed = ExperimentConfig::from_json(&config.to_json().unwrap()).unwrap();
        assert_eq!(echoed, config);
    }
});
