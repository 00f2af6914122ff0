#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::VocabularySet;

fuzz_target!(|data: &str| {
    let _ = VocabularySet::parse(data);
});
