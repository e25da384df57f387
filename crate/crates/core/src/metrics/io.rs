//! Evaluation inputs: prediction JSON lines and YOLO ground-truth folders.
//!
//! Prediction line: `{"image": "id", "class": "5taka" | 29, "confidence":
//! 0.9, "box": [x1, y1, x2, y2], "width": 640, "height": 480}`. The box is
//! in pixels; `width`/`height` may be omitted when an image named `id` sits
//! next to its label. Matching runs on normalized coordinates, which leaves
//! IoU unchanged.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::eval::ImageEval;
use crate::datakit::{class_lookup, read_yolo_txt, Annotation};
use crate::error::{Error, Result};
use crate::head::{Detection, GroundTruth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassKey {
    Id(usize),
    Name(String),
}

impl ClassKey {
    pub fn resolve(&self) -> Result<usize> {
        match self {
            ClassKey::Id(id) => class_lookup(&id.to_string()).map(|e| e.class_id),
            ClassKey::Name(name) => class_lookup(name).map(|e| e.class_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub image: String,
    pub class: ClassKey,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

pub fn parse_predictions_jsonl(text: &str) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?;
        if !rec.confidence.is_finite() || !(0.0..=1.0).contains(&rec.confidence) {
            return Err(Error::Range { line: i + 1, what: "confidence", value: rec.confidence.to_string() });
        }
        if rec.bbox.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line: i + 1, reason: "box has non-finite coordinates".into() });
        }
        rec.class.resolve().map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn format_predictions_jsonl(records: &[PredictionRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("plain record") + "\n").collect()
}

/// Ground truth found under `dir`.
#[derive(Debug, Clone, Default)]
pub struct GroundTruthSet {
    pub labels: BTreeMap<String, Vec<Annotation>>,
    /// Image files by id, for recovering pixel sizes.
    pub images: BTreeMap<String, PathBuf>,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Collects every `*.txt` label (except `classes.txt`) below `dir`, keyed by
/// file stem, plus any PNG/JPEG of the same stem.
pub fn load_ground_truth_dir(dir: impl AsRef<Path>) -> Result<GroundTruthSet> {
    let mut files = Vec::new();
    walk(dir.as_ref(), &mut files)?;
    files.sort();
    let mut set = GroundTruthSet::default();
    for path in files {
        let (Some(stem), Some(ext)) = (path.file_stem().and_then(|s| s.to_str()), path.extension().and_then(|s| s.to_str())) else {
            continue;
        };
        match ext.to_ascii_lowercase().as_str() {
            "txt" if path.file_name().is_some_and(|n| n != "classes.txt") => {
                if set.labels.insert(stem.to_string(), read_yolo_txt(&path)?).is_some() {
                    return Err(Error::format(path.display().to_string(), format!("duplicate image id {stem}")));
                }
            }
            "png" | "jpg" | "jpeg" => {
                set.images.insert(stem.to_string(), path);
            }
            _ => {}
        }
    }
    Ok(set)
}

/// Joins predictions with ground truth in normalized coordinates. Images with
/// labels but no predictions contribute only misses.
pub fn assemble(preds: &[PredictionRecord], gt: &GroundTruthSet) -> Result<Vec<ImageEval>> {
    let mut by_image: BTreeMap<String, ImageEval> = BTreeMap::new();
    for (id, anns) in &gt.labels {
        by_image.insert(
            id.clone(),
            ImageEval {
                image: id.clone(),
                preds: Vec::new(),
                gts: anns.iter().map(|a| GroundTruth { bbox: a.to_xyxy(1.0, 1.0), class_id: a.class_id }).collect(),
            },
        );
    }
    let mut sizes: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for rec in preds {
        let (w, h) = match (rec.width, rec.height) {
            (Some(w), Some(h)) if w > 0 && h > 0 => (w as f64, h as f64),
            _ => match sizes.get(&rec.image) {
                Some(&s) => s,
                None => {
                    let path = gt.images.get(&rec.image).ok_or_else(|| {
                        Error::format(&rec.image, "prediction has no width/height and no image file to read them from")
                    })?;
                    let (w, h) = image::image_dimensions(path)?;
                    (w as f64, h as f64)
                }
            },
        };
        sizes.insert(rec.image.clone(), (w, h));
        let b = rec.bbox;
        let entry = by_image.entry(rec.image.clone()).or_insert_with(|| ImageEval { image: rec.image.clone(), ..Default::default() });
        entry.preds.push(Detection {
            bbox: [b[0] / w, b[1] / h, b[2] / w, b[3] / h],
            class_id: rec.class.resolve()?,
            confidence: rec.confidence,
        });
    }
    Ok(by_image.into_values().collect())
}
