#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_evalbench::{ms_accuracy, parse_logs};

fuzz_target!(|data: &str| {
    if let Ok(run) = parse_logs(data) {
        if let Ok(report) = ms_accuracy(&run.logs) {
            assert_eq!(report.total_turns(), run.logs.len() as u64);
        }
    }
});
