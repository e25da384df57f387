#![no_main]

use denom_core::metrics::{format_predictions_jsonl, parse_predictions_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(records) = parse_predictions_jsonl(text) else { return };
    for r in &records {
        let _ = r.class.resolve();
    }
    let again = parse_predictions_jsonl(&format_predictions_jsonl(&records)).expect("formatted records parse");
    assert_eq!(again.len(), records.len());
});
