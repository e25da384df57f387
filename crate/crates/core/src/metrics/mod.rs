//! Detection evaluation: greedy IoU matching, precision/recall/F1, the
//! confusion matrix with a background class, and all-point interpolated
//! AP/mAP.

mod ap;
mod confusion;
mod eval;
mod io;
mod matching;

pub use ap::{average_precision, coco_thresholds, mean_ap, PrCurve};
pub use confusion::{accuracy_from_trace, confusion_matrix, ConfusionMatrix};
pub use eval::{class_aps, evaluate, ClassAp, EvalReport, ImageEval};
pub use io::{
    assemble, format_predictions_jsonl, load_ground_truth_dir, parse_predictions_jsonl, ClassKey, GroundTruthSet,
    PredictionRecord,
};
pub use matching::{
    f1_score, match_detections, precision_recall_f1_accuracy, ranked, rematch_cross_class, Counts, MatchResult, Scores,
    DEFAULT_MATCH_IOU,
};
