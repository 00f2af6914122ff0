#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::protocol::{parse_output, render_output};

fuzz_target!(|data: &str| {
    if let Ok(parsed) = parse_output(data) {
        assert!(parsed.is_valid());
        assert_eq!(parse_output(&render_output(&parsed)).unwrap(), parsed);
    }
});
