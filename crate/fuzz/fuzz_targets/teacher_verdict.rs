#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::protocol::parse_teacher_verdict;

fuzz_target!(|data: &str| {
    if let Ok(v) = parse_teacher_verdict(data) {
        assert!(v.is_well_formed(), "{v:?}");
    }
});
