#![no_main]

use denom_core::datakit::{format_yolo, parse_yolo};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(boxes) = parse_yolo(text) else { return };
    let again = parse_yolo(&format_yolo(&boxes)).expect("formatted labels parse");
    assert_eq!(again.len(), boxes.len());
});
