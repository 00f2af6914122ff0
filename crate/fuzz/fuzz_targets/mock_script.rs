#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_backends::mock::MockScript;

fuzz_target!(|data: &str| {
    if let Ok(script) = MockScript::parse(data) {
        assert_eq!(MockScript::parse(&script.to_json_pretty()).unwrap(), script);
    }
});
