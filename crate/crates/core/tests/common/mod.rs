#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use denom_core::head::{encode_box, shape_iou, GroundTruth, HeadConfig, TrainSample, NUM_ANCHORS, NUM_SCALES, STRIDES};
use denom_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small head for finite-difference checks: 2 classes, hidden 8, SE 8 -> 2.
pub fn tiny_config() -> HeadConfig {
    HeadConfig {
        in_channels: [3, 4, 5],
        hidden: 8,
        reduction: 4,
        num_classes: 2,
        input_size: 96,
        anchors: [
            [[6.0, 8.0], [10.0, 6.0], [12.0, 14.0]],
            [[16.0, 20.0], [24.0, 16.0], [22.0, 30.0]],
            [[40.0, 32.0], [36.0, 50.0], [60.0, 60.0]],
        ],
    }
}

/// Eight samples, one box each. Features are low-level noise everywhere plus
/// a per-sample signature vector at the cell the box is assigned to.
pub fn overfit_fixture(config: &HeadConfig, seed: u64) -> Vec<TrainSample<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..8)
        .map(|i| {
            let (scale, anchor) = (i % NUM_SCALES, (i / NUM_SCALES) % NUM_ANCHORS);
            let [aw, ah] = config.anchors[scale][anchor];
            let w = aw * rng.gen_range(0.85..1.15);
            let h = ah * rng.gen_range(0.85..1.15);
            let size = config.input_size as f64;
            let cx = rng.gen_range(w / 2.0 + 1.0..size - w / 2.0 - 1.0);
            let cy = rng.gen_range(h / 2.0 + 1.0..size - h / 2.0 - 1.0);
            let bbox = [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0];
            let target = GroundTruth { bbox, class_id: (i * 7) % config.num_classes };
            let (gx, gy, _) = encode_box(&bbox, scale, anchor, config).unwrap();
            let features = (0..NUM_SCALES)
                .map(|s| {
                    let (c, g) = (config.in_channels[s], config.grid(s));
                    let mut t = Tensor::<f32>::randn(&[1, c, g, g], 0.1, &mut rng);
                    if s == scale {
                        for ch in 0..c {
                            let v: f32 = rng.gen_range(-1.0..1.0);
                            t.data_mut()[(ch * g + gy) * g + gx] += 2.0 * v;
                        }
                    }
                    t
                })
                .collect();
            TrainSample { features, targets: vec![target] }
        })
        .collect()
}

pub fn best_anchor(config: &HeadConfig, w: f64, h: f64) -> (usize, usize) {
    let mut best = (0, 0, -1.0);
    for s in 0..NUM_SCALES {
        for a in 0..NUM_ANCHORS {
            let v = shape_iou([w, h], config.anchors[s][a]);
            if v > best.2 {
                best = (s, a, v);
            }
        }
    }
    (best.0, best.1)
}

pub fn stride(scale: usize) -> f64 {
    STRIDES[scale] as f64
}
