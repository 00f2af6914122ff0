#![no_main]

use libfuzzer_sys::fuzz_target;
use midsmith_backends::wire::{decode_b64, decode_chat_response, decode_t2i_response, decode_vqa_response};

fuzz_target!(|data: &[u8]| {
    let _ = decode_chat_response(data);
    let _ = decode_t2i_response(data);
    if let Ok(p) = decode_vqa_response(data) {
        assert!((0.0..=1.0).contains(&p));
    }
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = decode_b64(s);
    }
});
