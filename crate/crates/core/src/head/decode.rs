use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::config::{HeadConfig, NUM_ANCHORS, NUM_SCALES, STRIDES};
use crate::error::{Error, Result};
use crate::tensor::{sigmoid_scalar, Scalar, Tensor};

/// Largest width/height logit honored by decoding; keeps `exp` bounded.
pub const MAX_WH_LOGIT: f64 = 4.0;
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_NMS_IOU: f64 = 0.45;

/// Axis-aligned box `[x1, y1, x2, y2]` in pixels.
pub type BoxXyxy = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "xyxy")]
    pub bbox: BoxXyxy,
    pub class_id: usize,
    /// Objectness times the class probability.
    pub confidence: f64,
}

pub fn area(b: &BoxXyxy) -> f64 {
    (b[2] - b[0]).max(0.0) * (b[3] - b[1]).max(0.0)
}

/// Intersection over union; zero for disjoint or zero-area boxes.
pub fn iou(a: &BoxXyxy, b: &BoxXyxy) -> f64 {
    let (aa, ab) = (area(a), area(b));
    if aa <= 0.0 || ab <= 0.0 {
        return 0.0;
    }
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (aa + ab - inter)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Grid cell and box logits `[tx, ty, tw, th]` that decode back to `bbox`
/// for the given scale and anchor.
pub fn encode_box(bbox: &BoxXyxy, scale: usize, anchor: usize, config: &HeadConfig) -> Result<(usize, usize, [f64; 4])> {
    if scale >= NUM_SCALES || anchor >= NUM_ANCHORS {
        return Err(Error::invalid(format!("encode: no anchor {anchor} at scale {scale}")));
    }
    let stride = STRIDES[scale] as f64;
    let grid = config.grid(scale);
    let (w, h) = (bbox[2] - bbox[0], bbox[3] - bbox[1]);
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::invalid(format!("encode: degenerate box {bbox:?}")));
    }
    let (cx, cy) = ((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0);
    let gx = ((cx / stride).floor().max(0.0) as usize).min(grid - 1);
    let gy = ((cy / stride).floor().max(0.0) as usize).min(grid - 1);
    let fx = (cx / stride - gx as f64).clamp(1e-9, 1.0 - 1e-9);
    let fy = (cy / stride - gy as f64).clamp(1e-9, 1.0 - 1e-9);
    let [aw, ah] = config.anchors[scale][anchor];
    let (tw, th) = ((w / aw).ln(), (h / ah).ln());
    if tw > MAX_WH_LOGIT || th > MAX_WH_LOGIT {
        return Err(Error::invalid(format!(
            "encode: box {bbox:?} exceeds exp({MAX_WH_LOGIT}) times anchor {:?}",
            [aw, ah]
        )));
    }
    Ok((gx, gy, [logit(fx), logit(fy), tw, th]))
}

/// Box for one anchor slot, before clamping to the canvas.
pub fn decode_box(t: [f64; 4], gx: usize, gy: usize, stride: f64, anchor: [f64; 2]) -> BoxXyxy {
    let cx = (gx as f64 + sigmoid_scalar(t[0])) * stride;
    let cy = (gy as f64 + sigmoid_scalar(t[1])) * stride;
    let w = anchor[0] * t[2].min(MAX_WH_LOGIT).exp();
    let h = anchor[1] * t[3].min(MAX_WH_LOGIT).exp();
    [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0]
}

fn check_raw<T: Scalar>(raw: &[Tensor<T>], config: &HeadConfig) -> Result<usize> {
    if raw.len() != NUM_SCALES {
        return Err(Error::invalid(format!("decode: expected {NUM_SCALES} scales, got {}", raw.len())));
    }
    let b = raw[0].dims4("raw head output")?[0];
    for (s, t) in raw.iter().enumerate() {
        let g = config.grid(s);
        let expected = [b, config.out_channels(), g, g];
        if t.shape() != expected {
            return Err(Error::shape("raw head output", expected, t.shape()));
        }
    }
    Ok(b)
}

/// Decodes every image of the batch.
pub fn decode_batch<T: Scalar>(raw: &[Tensor<T>], config: &HeadConfig, conf_threshold: f64) -> Result<Vec<Vec<Detection>>> {
    if !(0.0..=1.0).contains(&conf_threshold) {
        return Err(Error::invalid(format!("decode: threshold {conf_threshold} outside [0, 1]")));
    }
    let b = check_raw(raw, config)?;
    let no = config.outputs_per_anchor();
    let size = config.input_size as f64;
    let mut out = vec![Vec::new(); b];
    for (s, t) in raw.iter().enumerate() {
        let g = config.grid(s);
        let plane = g * g;
        let stride = STRIDES[s] as f64;
        for (bi, dets) in out.iter_mut().enumerate() {
            let img = &t.data()[bi * config.out_channels() * plane..(bi + 1) * config.out_channels() * plane];
            let at = |ch: usize, cell: usize| img[ch * plane + cell].as_f64();
            for a in 0..NUM_ANCHORS {
                let base = a * no;
                for cell in 0..plane {
                    let obj = sigmoid_scalar(at(base + 4, cell));
                    if obj < conf_threshold {
                        continue;
                    }
                    let (mut best, mut best_p) = (0, f64::NEG_INFINITY);
                    for c in 0..config.num_classes {
                        let p = at(base + 5 + c, cell);
                        if p > best_p {
                            best = c;
                            best_p = p;
                        }
                    }
                    let confidence = obj * sigmoid_scalar(best_p);
                    if confidence < conf_threshold {
                        continue;
                    }
                    let t4 = [at(base, cell), at(base + 1, cell), at(base + 2, cell), at(base + 3, cell)];
                    let bx = decode_box(t4, cell % g, cell / g, stride, config.anchors[s][a]);
                    let bbox = bx.map(|v| v.clamp(0.0, size));
                    if bbox[2] <= bbox[0] || bbox[3] <= bbox[1] {
                        continue;
                    }
                    dets.push(Detection {
                        bbox,
                        class_id: best,
                        confidence,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Decodes a single-image output.
pub fn decode<T: Scalar>(raw: &[Tensor<T>], config: &HeadConfig, conf_threshold: f64) -> Result<Vec<Detection>> {
    let mut all = decode_batch(raw, config, conf_threshold)?;
    if all.len() != 1 {
        return Err(Error::shape("decode batch", 1, all.len()));
    }
    Ok(all.pop().expect("one image"))
}

/// Descending confidence, then ascending x1, then ascending y1.
pub fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.bbox[0].total_cmp(&b.bbox[0]))
        .then(a.bbox[1].total_cmp(&b.bbox[1]))
}

/// Class-wise greedy non-maximum suppression. Output is in rank order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(rank_order);
    let mut kept: Vec<Detection> = Vec::new();
    for d in sorted {
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == d.class_id && iou(&k.bbox, &d.bbox) >= iou_threshold);
        if !suppressed {
            kept.push(d);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&[0.0, 0.0, 10.0, 10.0], &[0.0, 0.0, 10.0, 10.0]), 1.0);
        assert_eq!(iou(&[0.0, 0.0, 10.0, 10.0], &[20.0, 0.0, 30.0, 10.0]), 0.0);
        assert!((iou(&[0.0, 0.0, 10.0, 10.0], &[5.0, 0.0, 15.0, 10.0]) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&[0.0, 0.0, 0.0, 10.0], &[0.0, 0.0, 10.0, 10.0]), 0.0);
    }

    #[test]
    fn nms_keeps_one_of_overlapping_pair() {
        let a = Detection { bbox: [0.0, 0.0, 10.0, 10.0], class_id: 1, confidence: 0.9 };
        let b = Detection { bbox: [0.0, 0.0, 10.0, 9.0], class_id: 1, confidence: 0.8 };
        assert_eq!(nms(&[b, a], 0.45), vec![a]);
        let c = Detection { class_id: 2, ..b };
        assert_eq!(nms(&[a, c], 0.45).len(), 2);
    }

    #[test]
    fn encode_decode_round_trip() {
        let cfg = HeadConfig::default();
        let b = [301.25, 17.5, 390.0, 99.75];
        let (gx, gy, t) = encode_box(&b, 2, 0, &cfg).unwrap();
        let back = decode_box(t, gx, gy, 32.0, cfg.anchors[2][0]);
        for i in 0..4 {
            assert!((back[i] - b[i]).abs() < 1e-6);
        }
    }
}
