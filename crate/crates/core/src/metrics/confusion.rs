use serde::{Deserialize, Serialize};

use super::eval::ImageEval;
use super::matching::{match_detections, rematch_cross_class};

/// `(N + 1) x (N + 1)` counts; rows are ground-truth classes, columns are
/// predicted classes, index `N` is background on both axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    matrix: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix { num_classes, matrix: vec![vec![0; num_classes + 1]; num_classes + 1] }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn background(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.matrix[gt][pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        self.matrix[gt][pred] += n;
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.matrix
    }

    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.matrix[i][i]).sum()
    }
}

/// Trace over total; zero for an empty matrix.
pub fn accuracy_from_trace(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        0.0
    } else {
        cm.trace() as f64 / total as f64
    }
}

/// Class-aware matches land on the diagonal; leftover predictions that
/// overlap a leftover ground truth of another class land off the diagonal;
/// the rest go to the background row or column. Out-of-range class ids are
/// ignored.
pub fn confusion_matrix(images: &[ImageEval], num_classes: usize, iou_threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(num_classes);
    let bg = num_classes;
    for im in images {
        let m = match_detections(&im.preds, &im.gts, iou_threshold);
        let cross = rematch_cross_class(&im.preds, &im.gts, &m, iou_threshold);
        // background is only ever passed explicitly
        let mut cell = |gt: usize, pred: usize| {
            if (gt < bg || gt == bg && pred != bg) && (pred < bg || pred == bg && gt != bg) {
                cm.add(gt, pred, 1);
            }
        };
        for &(i, j, _) in &m.tp {
            cell(im.gts[j].class_id, im.preds[i].class_id);
        }
        for &(i, j) in &cross {
            cell(im.gts[j].class_id, im.preds[i].class_id);
        }
        for &i in m.fp.iter().filter(|i| !cross.iter().any(|c| c.0 == **i)) {
            cell(bg, im.preds[i].class_id);
        }
        for &j in m.fn_.iter().filter(|j| !cross.iter().any(|c| c.1 == **j)) {
            cell(im.gts[j].class_id, bg);
        }
    }
    cm
}
