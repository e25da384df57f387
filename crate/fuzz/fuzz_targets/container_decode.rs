#![no_main]

use denom_core::container::Container;
use denom_core::features::FeatureSet;
use denom_core::head::{DetectionHead, HeadConfig};
use libfuzzer_sys::fuzz_target;

fn small_head() -> HeadConfig {
    HeadConfig {
        in_channels: [3, 4, 5],
        hidden: 8,
        reduction: 4,
        num_classes: 2,
        input_size: 96,
        anchors: HeadConfig::default().anchors,
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(c) = Container::decode(data) else { return };
    // accepted input is canonical: re-encoding gives the same bytes
    assert_eq!(c.encode(), data);
    let _ = FeatureSet::from_container(&c);
    let _ = DetectionHead::<f32>::from_container(small_head(), &c);
});
