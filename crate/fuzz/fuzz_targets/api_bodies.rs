#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_gateway::api::{CreateSession, EvalRequest, History, PostMessage};

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<CreateSession>(data);
    let _ = serde_json::from_slice::<PostMessage>(data);
    let _ = serde_json::from_slice::<EvalRequest>(data);
    if let Ok(h) = serde_json::from_slice::<History>(data) {
        let again: History = serde_json::from_slice(&serde_json::to_vec(&h).unwrap()).unwrap();
        assert_eq!(again, h);
    }
});
