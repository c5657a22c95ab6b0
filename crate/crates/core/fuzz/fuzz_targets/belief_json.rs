#![no_main]

use cmab::beliefs::BeliefState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(belief) = BeliefState::from_json(text) {
        for arm in 0..belief.n_arms() {
            let mean = belief.empirical_mean(arm);
            assert!((0.0..=1.0).contains(&mean));
            if belief.pulls(arm) > 0 {
                assert_eq!(belief.one_step_expectation(arm).unwrap(), mean);
            }
        }
    }
});
