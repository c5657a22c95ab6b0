#![no_main]

use cmab::metrics::{read_metrics_csv, write_metrics_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_metrics_csv(data) {
        let mut out = Vec::new();
        write_metrics_csv(&records, &mut out).unwrap();
        assert_eq!(read_metrics_csv(out.as_slice()).unwrap(), records);
    }
});
