#![no_main]

use cmab::harness::ExperimentSummary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ExperimentSummary::from_json(text);
    }
});
