#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::dataset::{parse_dataset, render_dataset};

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_dataset(data) {
        for r in &records {
            assert!(r.validate().is_ok());
        }
        assert_eq!(parse_dataset(&render_dataset(&records)).unwrap(), records);
    }
});
