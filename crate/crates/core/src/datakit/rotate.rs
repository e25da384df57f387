//! Rotation augmentation about the image center.
//!
//! Angles are in degrees and rotate point coordinates by the standard matrix
//! `[[cos, -sin], [sin, cos]]` applied in image coordinates (x right, y
//! down). Multiples of 90 degrees are exact pixel permutations; other angles
//! sample bilinearly and fill exposed corners white.

use super::yolo::Annotation;
use crate::error::{Error, Result};
use crate::imgproc::{Image, WHITE};

/// Boxes whose clipped rotated area falls below this share of the original
/// area are dropped.
pub const MIN_KEPT_AREA: f64 = 0.2;

/// Base rotations, then quarter turns applied to each base.
pub const BASE_ANGLES: [u32; 3] = [0, 30, 60];
pub const TURN_ANGLES: [u32; 4] = [90, 180, 270, 360];

fn quarter_turns(angle: f64) -> Option<u32> {
    let a = angle.rem_euclid(360.0);
    [0.0, 90.0, 180.0, 270.0]
        .iter()
        .position(|&q| a == q)
        .map(|q| q as u32)
}

/// `(cos, sin)` with exact values on the quarter turns.
fn cos_sin(angle: f64) -> (f64, f64) {
    match quarter_turns(angle) {
        Some(0) => (1.0, 0.0),
        Some(1) => (0.0, 1.0),
        Some(2) => (-1.0, 0.0),
        Some(3) => (0.0, -1.0),
        _ => {
            let r = angle.to_radians();
            (r.cos(), r.sin())
        }
    }
}

fn rotate_quarter(img: &Image, turns: u32) -> Image {
    let n = img.width();
    let last = n - 1;
    Image::from_fn(n, n, img.channels(), |x, y, c| match turns {
        0 => img.get(x, y, c),
        1 => img.get(y, last - x, c),
        2 => img.get(last - x, last - y, c),
        _ => img.get(last - y, x, c),
    })
}

fn rotate_bilinear(img: &Image, cos: f64, sin: f64) -> Image {
    let n = img.width();
    let ch = img.channels();
    let c = n as f64 / 2.0;
    let sample = |x: isize, y: isize, k: usize| -> f64 {
        if x < 0 || y < 0 || x >= n as isize || y >= n as isize {
            WHITE as f64
        } else {
            img.get(x as usize, y as usize, k) as f64
        }
    };
    let mut out = Image::filled(n, n, ch, WHITE);
    for qy in 0..n {
        for qx in 0..n {
            // inverse rotation of the output pixel center
            let (dx, dy) = (qx as f64 + 0.5 - c, qy as f64 + 0.5 - c);
            let px = cos * dx + sin * dy + c - 0.5;
            let py = -sin * dx + cos * dy + c - 0.5;
            if px <= -1.0 || py <= -1.0 || px >= n as f64 || py >= n as f64 {
                continue;
            }
            let (x0, y0) = (px.floor(), py.floor());
            let (fx, fy) = (px - x0, py - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            for k in 0..ch {
                let v = (1.0 - fy) * ((1.0 - fx) * sample(x0, y0, k) + fx * sample(x0 + 1, y0, k))
                    + fy * ((1.0 - fx) * sample(x0, y0 + 1, k) + fx * sample(x0 + 1, y0 + 1, k));
                out.set(qx, qy, k, (v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Rotated, clipped axis-aligned box, or `None` when too little survives.
pub fn rotate_annotation(a: &Annotation, angle_degrees: f64) -> Option<Annotation> {
    if quarter_turns(angle_degrees) == Some(0) {
        return Some(*a);
    }
    let (cos, sin) = cos_sin(angle_degrees);
    let [x1, y1, x2, y2] = a.to_xyxy(1.0, 1.0);
    let corners = [(x1, y1), (x2, y1), (x1, y2), (x2, y2)];
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for (x, y) in corners {
        let (dx, dy) = (x - 0.5, y - 0.5);
        let rx = cos * dx - sin * dy + 0.5;
        let ry = sin * dx + cos * dy + 0.5;
        b = [b[0].min(rx), b[1].min(ry), b[2].max(rx), b[3].max(ry)];
    }
    let clipped = [b[0].max(0.0), b[1].max(0.0), b[2].min(1.0), b[3].min(1.0)];
    let area = (clipped[2] - clipped[0]).max(0.0) * (clipped[3] - clipped[1]).max(0.0);
    if area < MIN_KEPT_AREA * a.w * a.h || area <= 0.0 {
        return None;
    }
    Some(Annotation::from_xyxy(a.class_id, clipped, 1.0, 1.0))
}

/// Rotates a square image and its boxes about the center. Any finite angle
/// is accepted; the augmentation uses 30, 60 and the quarter turns.
pub fn rotate_image_and_boxes(img: &Image, annotations: &[Annotation], angle_degrees: f64) -> Result<(Image, Vec<Annotation>)> {
    if img.is_empty() || img.width() != img.height() {
        return Err(Error::InvalidArgument(format!(
            "rotation needs a non-empty square image, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    if !angle_degrees.is_finite() {
        return Err(Error::InvalidArgument(format!("rotation angle {angle_degrees} is not finite")));
    }
    let out = match quarter_turns(angle_degrees) {
        Some(t) => rotate_quarter(img, t),
        None => {
            let (cos, sin) = cos_sin(angle_degrees);
            rotate_bilinear(img, cos, sin)
        }
    };
    let boxes = annotations.iter().filter_map(|a| rotate_annotation(a, angle_degrees)).collect();
    Ok((out, boxes))
}

/// One output of [`augment_twelve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub base: u32,
    pub turn: u32,
    pub image: Image,
    pub annotations: Vec<Annotation>,
}

/// `{0, 30, 60} x {90, 180, 270, 360}` in that order; the 360 column
/// reproduces each base rotation.
pub fn augment_twelve(img: &Image, annotations: &[Annotation]) -> Result<Vec<Augmented>> {
    let mut out = Vec::with_capacity(BASE_ANGLES.len() * TURN_ANGLES.len());
    for base in BASE_ANGLES {
        let (rotated, boxes) = rotate_image_and_boxes(img, annotations, base as f64)?;
        for turn in TURN_ANGLES {
            let (image, annotations) = rotate_image_and_boxes(&rotated, &boxes, turn as f64)?;
            out.push(Augmented { base, turn, image, annotations });
        }
    }
    Ok(out)
}
