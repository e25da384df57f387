#![no_main]

use denom_service::protocol::{parse_client_message, ServerMessage};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_client_message(text) {
        Ok(_) => {}
        Err(e) => assert!(matches!(e, ServerMessage::Error { .. })),
    }
});
