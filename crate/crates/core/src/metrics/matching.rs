use serde::{Deserialize, Serialize};

use crate::head::{iou, rank_order, Detection, GroundTruth};

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

/// Indices into the prediction and ground-truth slices of one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(pred, gt, iou)` in the order the predictions were ranked.
    pub tp: Vec<(usize, usize, f64)>,
    pub fp: Vec<usize>,
    #[serde(rename = "fn")]
    pub fn_: Vec<usize>,
}

/// Prediction indices sorted by confidence, then box corner.
pub fn ranked(preds: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| rank_order(&preds[a], &preds[b]).then(a.cmp(&b)));
    order
}

fn best_gt(
    pred: &Detection,
    gts: &[GroundTruth],
    taken: &[bool],
    threshold: f64,
    same_class: bool,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, g) in gts.iter().enumerate() {
        if taken[j] || (same_class && g.class_id != pred.class_id) {
            continue;
        }
        let v = iou(&pred.bbox, &g.bbox);
        if v >= threshold && best.map_or(true, |(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best
}

/// Greedy class-aware matching: predictions in rank order each take the
/// unmatched same-class ground truth of highest IoU at or above `threshold`.
pub fn match_detections(preds: &[Detection], gts: &[GroundTruth], threshold: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut out = MatchResult::default();
    for i in ranked(preds) {
        match best_gt(&preds[i], gts, &taken, threshold, true) {
            Some((j, v)) => {
                taken[j] = true;
                out.tp.push((i, j, v));
            }
            None => out.fp.push(i),
        }
    }
    out.fn_ = (0..gts.len()).filter(|&j| !taken[j]).collect();
    out
}

/// Second pass over the leftovers of `m` ignoring class: pairs a false
/// positive with an unmatched ground truth of another class.
pub fn rematch_cross_class(
    preds: &[Detection],
    gts: &[GroundTruth],
    m: &MatchResult,
    threshold: f64,
) -> Vec<(usize, usize)> {
    let mut taken = vec![true; gts.len()];
    for &j in &m.fn_ {
        taken[j] = false;
    }
    let mut pairs = Vec::new();
    // m.fp is already in rank order
    for &i in &m.fp {
        if let Some((j, _)) = best_gt(&preds[i], gts, &taken, threshold, false) {
            taken[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn from_match(m: &MatchResult) -> Self {
        Counts { tp: m.tp.len() as u64, fp: m.fp.len() as u64, fn_: m.fn_.len() as u64, tn: 0 }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Harmonic mean; zero when both inputs are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// Accuracy, precision, recall and F1 from raw counts. A zero denominator
/// yields zero.
pub fn precision_recall_f1_accuracy(c: &Counts) -> Scores {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Scores {
        accuracy: ratio(tp + tn, tp + tn + fp + fn_),
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}
