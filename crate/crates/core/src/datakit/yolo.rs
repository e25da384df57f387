//! YOLO text labels: one `class_id cx cy w h` line per box, coordinates
//! normalized to the image size.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classes::NUM_CLASSES;
use crate::error::{Error, Result};

/// Tolerance for boxes that poke past the image edge by rounding.
const EDGE_EPS: f64 = 2e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Annotation {
    /// Pixel `[x1, y1, x2, y2]` for an image of the given size.
    pub fn to_xyxy(&self, width: f64, height: f64) -> [f64; 4] {
        [
            (self.cx - self.w / 2.0) * width,
            (self.cy - self.h / 2.0) * height,
            (self.cx + self.w / 2.0) * width,
            (self.cy + self.h / 2.0) * height,
        ]
    }

    pub fn from_xyxy(class_id: usize, b: [f64; 4], width: f64, height: f64) -> Self {
        Annotation {
            class_id,
            cx: (b[0] + b[2]) / 2.0 / width,
            cy: (b[1] + b[3]) / 2.0 / height,
            w: (b[2] - b[0]) / width,
            h: (b[3] - b[1]) / height,
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        if self.class_id >= NUM_CLASSES {
            return Err(Error::Range { line, what: "class_id", value: self.class_id.to_string() });
        }
        for (what, v) in [("cx", self.cx), ("cy", self.cy), ("w", self.w), ("h", self.h)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range { line, what, value: v.to_string() });
            }
        }
        let [x1, y1, x2, y2] = self.to_xyxy(1.0, 1.0);
        if x1 < -EDGE_EPS || y1 < -EDGE_EPS || x2 > 1.0 + EDGE_EPS || y2 > 1.0 + EDGE_EPS {
            return Err(Error::Range { line, what: "box extent", value: format!("[{x1}, {y1}, {x2}, {y2}]") });
        }
        Ok(())
    }
}

/// Parses label text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_yolo(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse { line, reason: format!("expected 5 fields, found {}", fields.len()) });
        }
        let class_id = fields[0]
            .parse::<i64>()
            .map_err(|_| Error::Parse { line, reason: format!("class id {:?} is not an integer", fields[0]) })?;
        if !(0..NUM_CLASSES as i64).contains(&class_id) {
            return Err(Error::Range { line, what: "class_id", value: class_id.to_string() });
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse { line, reason: format!("{f:?} is not a finite number") })?;
        }
        let a = Annotation { class_id: class_id as usize, cx: v[0], cy: v[1], w: v[2], h: v[3] };
        a.validate(line)?;
        out.push(a);
    }
    Ok(out)
}

pub fn format_yolo(annotations: &[Annotation]) -> String {
    let mut s = String::new();
    for a in annotations {
        writeln!(s, "{} {:.6} {:.6} {:.6} {:.6}", a.class_id, a.cx, a.cy, a.w, a.h).unwrap();
    }
    s
}

pub fn read_yolo_txt(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_yolo(&text)
}

pub fn write_yolo_txt(annotations: &[Annotation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_yolo(annotations)).map_err(|e| Error::io(path, e))
}
