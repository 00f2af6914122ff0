#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_gateway::AppConfig;

// The first line is the value of MIDSMITH_PARALLELISM, the rest the file.
fuzz_target!(|data: &str| {
    let (env_value, json) = data.split_once('\n').unwrap_or((data, ""));
    let lookup = |k: &str| (k == "MIDSMITH_PARALLELISM").then(|| env_value.to_owned());
    if let Ok(c) = AppConfig::from_json_with_env(json, &lookup) {
        assert!(c.parallelism >= 1);
    }
});
