use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ap::{average_precision, coco_thresholds, mean_ap, PrCurve};
use super::confusion::{accuracy_from_trace, confusion_matrix, ConfusionMatrix};
use super::matching::{match_detections, precision_recall_f1_accuracy, Counts, DEFAULT_MATCH_IOU};
use crate::head::{Detection, GroundTruth};

/// Predictions and ground truth of one image in a shared coordinate frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageEval {
    pub image: String,
    pub preds: Vec<Detection>,
    pub gts: Vec<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: usize,
    pub name: String,
    pub gt: usize,
    pub ap50: Option<f64>,
    pub ap50_95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub counts: Counts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map50: f64,
    pub map50_95: f64,
    pub per_class: Vec<ClassAp>,
    pub confusion: ConfusionMatrix,
    /// PR curves at IoU 0.5, indexed by class.
    pub curves: Vec<Option<PrCurve>>,
}

/// Per-class APs at one IoU threshold, with the pooled counts.
pub fn class_aps(images: &[ImageEval], num_classes: usize, iou_threshold: f64) -> (Vec<Option<PrCurve>>, Counts) {
    let mut scored: Vec<Vec<(f64, bool)>> = vec![Vec::new(); num_classes];
    let mut gt_count = vec![0usize; num_classes];
    let mut counts = Counts::default();
    for im in images {
        let m = match_detections(&im.preds, &im.gts, iou_threshold);
        counts += Counts::from_match(&m);
        for g in &im.gts {
            if g.class_id < num_classes {
                gt_count[g.class_id] += 1;
            }
        }
        let mut flags: Vec<(usize, bool)> = m.tp.iter().map(|t| (t.0, true)).chain(m.fp.iter().map(|&i| (i, false))).collect();
        flags.sort_by_key(|f| f.0);
        for (i, tp) in flags {
            let d = &im.preds[i];
            if d.class_id < num_classes {
                scored[d.class_id].push((d.confidence, tp));
            }
        }
    }
    let curves = (0..num_classes).map(|c| average_precision(&scored[c], gt_count[c])).collect();
    (curves, counts)
}

/// Full report: counts and scores at IoU 0.5, mAP@0.5 and mAP@0.5:0.95,
/// per-class AP and the confusion matrix. Accuracy is the confusion-matrix
/// trace ratio since true negatives do not exist per detection.
pub fn evaluate(images: &[ImageEval], class_names: &[&str]) -> EvalReport {
    let n = class_names.len();
    let (curves, counts) = class_aps(images, n, DEFAULT_MATCH_IOU);
    let mut sums = vec![0.0; n];
    let mut defined = vec![false; n];
    for t in coco_thresholds() {
        let (c, _) = class_aps(images, n, t);
        for k in 0..n {
            if let Some(curve) = &c[k] {
                sums[k] += curve.ap;
                defined[k] = true;
            }
        }
    }
    let per_class: Vec<ClassAp> = (0..n)
        .map(|k| ClassAp {
            class_id: k,
            name: class_names[k].to_string(),
            gt: images.iter().flat_map(|im| &im.gts).filter(|g| g.class_id == k).count(),
            ap50: curves[k].as_ref().map(|c| c.ap),
            ap50_95: defined[k].then(|| sums[k] / coco_thresholds().len() as f64),
        })
        .collect();
    let scores = precision_recall_f1_accuracy(&counts);
    let confusion = confusion_matrix(images, n, DEFAULT_MATCH_IOU);
    EvalReport {
        counts,
        accuracy: accuracy_from_trace(&confusion),
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        map50: mean_ap(&per_class.iter().map(|c| c.ap50).collect::<Vec<_>>()),
        map50_95: mean_ap(&per_class.iter().map(|c| c.ap50_95).collect::<Vec<_>>()),
        per_class,
        confusion,
        curves,
    }
}

impl EvalReport {
    /// JSON report. The `(B)` keys repeat the box metrics under the labels
    /// common detection frameworks print.
    pub fn to_json(&self) -> Value {
        json!({
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "map50": self.map50,
            "map50_95": self.map50_95,
            "precision(B)": self.precision,
            "recall(B)": self.recall,
            "mAP50(B)": self.map50,
            "mAP50-95(B)": self.map50_95,
            "counts": self.counts,
            "per_class": self.per_class,
            "confusion_matrix": self.confusion,
        })
    }

    /// One line per class with a curve, e.g. `5taka AP50=0.972`, then the mean.
    pub fn curve_summary(&self) -> String {
        let mut s = String::new();
        for c in &self.per_class {
            if let Some(ap) = c.ap50 {
                s.push_str(&format!("{} AP50={:.3}\n", c.name, ap));
            }
        }
        s.push_str(&format!("all classes mAP50={:.3}\n", self.map50));
        s
    }
}
