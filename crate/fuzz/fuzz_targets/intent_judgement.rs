#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_forge::intent::parse_judgement;

fuzz_target!(|data: &str| {
    let _ = parse_judgement(data);
});
