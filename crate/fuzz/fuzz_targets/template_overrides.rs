#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::PromptTemplates;

fuzz_target!(|data: &str| {
    if let Ok(t) = PromptTemplates::default().with_overrides_json(data) {
        assert!(t.validate().is_ok());
    }
});
