use serde::{Deserialize, Serialize};

/// Precision/recall points in confidence order plus the enclosed AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("recall,precision\n");
        for (r, p) in &self.points {
            s.push_str(&format!("{r:.6},{p:.6}\n"));
        }
        s
    }
}

/// All-point interpolated AP over predictions given as `(confidence, is_tp)`.
///
/// Predictions are ordered by descending confidence; equal confidences keep
/// their input order. Returns `None` when there is nothing to score (no
/// ground truth and no predictions); predictions without any ground truth
/// score zero.
pub fn average_precision(scored: &[(f64, bool)], gt_count: usize) -> Option<PrCurve> {
    if gt_count == 0 {
        return if scored.is_empty() { None } else { Some(PrCurve { points: Vec::new(), ap: 0.0 }) };
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
    let mut points = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (k, &i) in order.iter().enumerate() {
        if scored[i].1 {
            tp += 1;
        }
        points.push((tp as f64 / gt_count as f64, tp as f64 / (k + 1) as f64));
    }
    // precision envelope from the right, then area over recall steps
    let mut envelope: Vec<f64> = points.iter().map(|p| p.1).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, &(r, _)) in points.iter().enumerate() {
        ap += (r - prev_recall) * envelope[k];
        prev_recall = r;
    }
    Some(PrCurve { points, ap })
}

/// Mean over the classes whose AP is defined; zero when none is.
pub fn mean_ap(per_class: &[Option<f64>]) -> f64 {
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

/// `0.50, 0.55, ..., 0.95`.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}
