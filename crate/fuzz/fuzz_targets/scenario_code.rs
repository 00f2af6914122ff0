#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_core::ModalityScenario;

fuzz_target!(|data: &str| {
    if let Ok(s) = data.parse::<ModalityScenario>() {
        assert_eq!(s.code().parse::<ModalityScenario>().unwrap(), s);
    }
});
