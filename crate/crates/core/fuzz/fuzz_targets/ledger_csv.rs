#![no_main]

use cmab::cisp::Ledger;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ledger) = Ledger::read_csv(data) {
        let mut out = Vec::new();
        ledger.write_csv(&mut out).unwrap();
        let again = Ledger::read_csv(out.as_slice()).unwrap();
        assert_eq!(again.entries().len(), ledger.entries().len());
    }
});
