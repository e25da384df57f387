#![no_main]

use denom_core::imgproc::{Image, MAX_DECODE_DIM};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(img) = Image::decode(data) else { return };
    assert!(img.width() <= MAX_DECODE_DIM as usize && img.height() <= MAX_DECODE_DIM as usize);
    assert_eq!(img.data().len(), img.width() * img.height() * img.channels());
});
