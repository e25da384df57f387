//! Training loss: `(1 - IoU)` on positive anchors, binary cross-entropy on
//! objectness everywhere and on class scores at positives.
//!
//! Normalization: box is a mean over positives; objectness is summed over
//! every anchor and divided by `max(1, positives)`; class BCE is summed over
//! classes and averaged over positives.

use serde::{Deserialize, Serialize};

use super::config::{HeadConfig, NUM_ANCHORS, NUM_SCALES, STRIDES};
use super::decode::{decode_box, BoxXyxy, MAX_WH_LOGIT};
use crate::error::{Error, Result};
use crate::tensor::{sigmoid_scalar, Scalar, Tensor};

/// A labeled box in input pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BoxXyxy,
    pub class_id: usize,
}

/// The unique anchor slot responsible for one ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub batch: usize,
    pub scale: usize,
    pub anchor: usize,
    pub gx: usize,
    pub gy: usize,
    pub target: GroundTruth,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTarget {
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    #[serde(rename = "box")]
    pub box_: f64,
    pub obj: f64,
    pub cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            box_: 7.5,
            obj: 1.0,
            cls: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub box_loss: f64,
    pub obj_loss: f64,
    pub cls_loss: f64,
}

/// IoU of two boxes that share a center.
pub fn shape_iou(a: [f64; 2], b: [f64; 2]) -> f64 {
    let inter = a[0].min(b[0]) * a[1].min(b[1]);
    inter / (a[0] * a[1] + b[0] * b[1] - inter)
}

/// Maps every ground-truth box to one `(scale, cell, anchor)` slot.
///
/// Anchors are ranked by shape IoU (ties to the lower flat index); the cell
/// is the one holding the box center. If the best slot is already taken by
/// another box of the same image, the next-ranked anchor is used.
pub fn assign_targets(batch: &[Vec<GroundTruth>], config: &HeadConfig) -> Result<TrainTarget> {
    let mut out = TrainTarget::default();
    for (bi, gts) in batch.iter().enumerate() {
        let mut taken: Vec<(usize, usize, usize, usize)> = Vec::new();
        for gt in gts {
            if gt.class_id >= config.num_classes {
                return Err(Error::invalid(format!("target class {} out of range", gt.class_id)));
            }
            let (w, h) = (gt.bbox[2] - gt.bbox[0], gt.bbox[3] - gt.bbox[1]);
            if !(w > 0.0 && h > 0.0) {
                return Err(Error::invalid(format!("degenerate target box {:?}", gt.bbox)));
            }
            let (cx, cy) = ((gt.bbox[0] + gt.bbox[2]) / 2.0, (gt.bbox[1] + gt.bbox[3]) / 2.0);
            let mut ranked: Vec<(usize, usize, f64)> = (0..NUM_SCALES)
                .flat_map(|s| (0..NUM_ANCHORS).map(move |a| (s, a)))
                .map(|(s, a)| (s, a, shape_iou([w, h], config.anchors[s][a])))
                .collect();
            ranked.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
            let slot = ranked.iter().find_map(|&(s, a, _)| {
                let stride = STRIDES[s] as f64;
                let last = config.grid(s) - 1;
                let gx = ((cx / stride).floor().max(0.0) as usize).min(last);
                let gy = ((cy / stride).floor().max(0.0) as usize).min(last);
                let key = (s, a, gy, gx);
                (!taken.contains(&key)).then_some(key)
            });
            let Some(key) = slot else {
                return Err(Error::invalid(format!(
                    "no free anchor slot for target {:?} in image {bi}",
                    gt.bbox
                )));
            };
            taken.push(key);
            let (scale, anchor, gy, gx) = key;
            out.assignments.push(Assignment {
                batch: bi,
                scale,
                anchor,
                gx,
                gy,
                target: *gt,
            });
        }
    }
    Ok(out)
}

/// Stable `BCE(sigmoid(x), y)` and its derivative in `x`.
fn bce_with_logits(x: f64, y: f64) -> (f64, f64) {
    let loss = x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
    (loss, sigmoid_scalar(x) - y)
}

/// IoU and its gradient with respect to the four coordinates of `p`.
fn iou_and_grad(p: &BoxXyxy, g: &BoxXyxy) -> (f64, [f64; 4]) {
    let iw = p[2].min(g[2]) - p[0].max(g[0]);
    let ih = p[3].min(g[3]) - p[1].max(g[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return (0.0, [0.0; 4]);
    }
    let (pw, ph) = (p[2] - p[0], p[3] - p[1]);
    let inter = iw * ih;
    let union = pw * ph + (g[2] - g[0]) * (g[3] - g[1]) - inter;
    let d_inter = (union + inter) / (union * union);
    let d_area = -inter / (union * union);
    let dx1 = if p[0] > g[0] { -ih } else { 0.0 };
    let dx2 = if p[2] < g[2] { ih } else { 0.0 };
    let dy1 = if p[1] > g[1] { -iw } else { 0.0 };
    let dy2 = if p[3] < g[3] { iw } else { 0.0 };
    (
        inter / union,
        [
            d_inter * dx1 - d_area * ph,
            d_inter * dy1 - d_area * pw,
            d_inter * dx2 + d_area * ph,
            d_inter * dy2 + d_area * pw,
        ],
    )
}

fn check<T: Scalar>(raw: &[Tensor<T>], config: &HeadConfig) -> Result<usize> {
    if raw.len() != NUM_SCALES {
        return Err(Error::invalid(format!("loss: expected {NUM_SCALES} scales, got {}", raw.len())));
    }
    let b = raw[0].dims4("raw head output")?[0];
    for (s, t) in raw.iter().enumerate() {
        let g = config.grid(s);
        let expected = [b, config.out_channels(), g, g];
        if t.shape() != expected {
            return Err(Error::shape("raw head output", expected, t.shape()));
        }
        if !t.all_finite() {
            return Err(Error::Numeric(format!("non-finite logits at scale {s}")));
        }
    }
    Ok(b)
}

/// Loss value only.
pub fn head_loss<T: Scalar>(
    raw: &[Tensor<T>],
    targets: &TrainTarget,
    config: &HeadConfig,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    Ok(head_loss_with_grad(raw, targets, config, weights)?.0)
}

/// Loss value and `dL/d(raw)` for every scale.
pub fn head_loss_with_grad<T: Scalar>(
    raw: &[Tensor<T>],
    targets: &TrainTarget,
    config: &HeadConfig,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<Tensor<T>>)> {
    let batch = check(raw, config)?;
    let no = config.outputs_per_anchor();
    let oc = config.out_channels();
    let n_pos = targets.assignments.len();
    let norm = n_pos.max(1) as f64;
    for a in &targets.assignments {
        if a.batch >= batch || a.scale >= NUM_SCALES || a.anchor >= NUM_ANCHORS {
            return Err(Error::invalid(format!("assignment {a:?} outside the batch layout")));
        }
    }

    let mut grads: Vec<Vec<f64>> = raw.iter().map(|t| vec![0.0; t.numel()]).collect();
    let index = |s: usize, b: usize, ch: usize, gy: usize, gx: usize| {
        let g = config.grid(s);
        ((b * oc + ch) * g + gy) * g + gx
    };

    let mut obj_loss = 0.0;
    for (s, t) in raw.iter().enumerate() {
        let g = config.grid(s);
        let plane = g * g;
        for b in 0..batch {
            for a in 0..NUM_ANCHORS {
                let start = (b * oc + a * no + 4) * plane;
                for i in start..start + plane {
                    let (l, d) = bce_with_logits(t.data()[i].as_f64(), 0.0);
                    obj_loss += l;
                    grads[s][i] = weights.obj * d / norm;
                }
            }
        }
    }

    let (mut box_loss, mut cls_loss) = (0.0, 0.0);
    for asg in &targets.assignments {
        let (s, b, gx, gy) = (asg.scale, asg.batch, asg.gx, asg.gy);
        let base = asg.anchor * no;
        let logit = |ch: usize| raw[s].data()[index(s, b, base + ch, gy, gx)].as_f64();

        let obj_i = index(s, b, base + 4, gy, gx);
        let (l0, _) = bce_with_logits(logit(4), 0.0);
        let (l1, d1) = bce_with_logits(logit(4), 1.0);
        obj_loss += l1 - l0;
        grads[s][obj_i] = weights.obj * d1 / norm;

        let t4 = [logit(0), logit(1), logit(2), logit(3)];
        let stride = STRIDES[s] as f64;
        let pred = decode_box(t4, gx, gy, stride, config.anchors[s][asg.anchor]);
        let (iou, d_box) = iou_and_grad(&pred, &asg.target.bbox);
        box_loss += 1.0 - iou;
        let scale = -weights.box_ / norm;
        let d_cx = d_box[0] + d_box[2];
        let d_cy = d_box[1] + d_box[3];
        let d_w = (d_box[2] - d_box[0]) / 2.0;
        let d_h = (d_box[3] - d_box[1]) / 2.0;
        let sx = sigmoid_scalar(t4[0]);
        let sy = sigmoid_scalar(t4[1]);
        let w = pred[2] - pred[0];
        let h = pred[3] - pred[1];
        let dt = [
            d_cx * stride * sx * (1.0 - sx),
            d_cy * stride * sy * (1.0 - sy),
            if t4[2] < MAX_WH_LOGIT { d_w * w } else { 0.0 },
            if t4[3] < MAX_WH_LOGIT { d_h * h } else { 0.0 },
        ];
        for (k, d) in dt.iter().enumerate() {
            grads[s][index(s, b, base + k, gy, gx)] += scale * d;
        }

        for c in 0..config.num_classes {
            let y = if c == asg.target.class_id { 1.0 } else { 0.0 };
            let (l, d) = bce_with_logits(logit(5 + c), y);
            cls_loss += l;
            grads[s][index(s, b, base + 5 + c, gy, gx)] += weights.cls * d / norm;
        }
    }

    let breakdown = LossBreakdown {
        box_loss: box_loss / norm,
        obj_loss: obj_loss / norm,
        cls_loss: cls_loss / norm,
        total: (weights.box_ * box_loss + weights.obj * obj_loss + weights.cls * cls_loss) / norm,
    };
    if !breakdown.total.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite: {breakdown:?}")));
    }
    let grads = raw
        .iter()
        .zip(grads)
        .map(|(t, g)| Tensor::from_vec(t.shape(), g.into_iter().map(T::from_f64_lossy).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((breakdown, grads))
}
