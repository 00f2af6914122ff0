#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::ContentAddress;

fuzz_target!(|data: &str| {
    if let Ok(a) = ContentAddress::parse(data) {
        assert_eq!(a.as_str().len(), 64);
        assert_eq!(ContentAddress::parse(a.as_str()).unwrap(), a);
    }
});
