use super::Image;
use crate::error::{Error, Result};

pub const DEFAULT_TARGET: usize = 640;
pub const WHITE: u8 = 255;

/// Coordinate bookkeeping for an aspect-preserving resize onto a square
/// canvas. Forward maps original pixels to canvas pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterboxTransform {
    pub scale: f64,
    pub pad_left: usize,
    pub pad_top: usize,
    pub original_width: usize,
    pub original_height: usize,
}

impl LetterboxTransform {
    pub fn identity(width: usize, height: usize) -> Self {
        LetterboxTransform {
            scale: 1.0,
            pad_left: 0,
            pad_top: 0,
            original_width: width,
            original_height: height,
        }
    }

    /// Transform for placing a `width` x `height` image on a `target` square.
    pub fn for_size(width: usize, height: usize, target: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("letterbox: empty image"));
        }
        if target == 0 {
            return Err(Error::invalid("letterbox: target must be positive"));
        }
        let scale = target as f64 / width.max(height) as f64;
        let (nw, nh) = scaled_size(width, height, scale, target);
        Ok(LetterboxTransform {
            scale,
            pad_left: (target - nw) / 2,
            pad_top: (target - nh) / 2,
            original_width: width,
            original_height: height,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.pad_left == 0 && self.pad_top == 0
    }

    pub fn forward_point(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.scale + self.pad_left as f64, y * self.scale + self.pad_top as f64)
    }

    pub fn inverse_point(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.pad_left as f64) / self.scale, (y - self.pad_top as f64) / self.scale)
    }

    pub fn forward_box(&self, b: [f64; 4]) -> [f64; 4] {
        let (x1, y1) = self.forward_point(b[0], b[1]);
        let (x2, y2) = self.forward_point(b[2], b[3]);
        [x1, y1, x2, y2]
    }

    /// Maps a canvas box back to original pixels, clipped to the image.
    pub fn inverse_box(&self, b: [f64; 4]) -> [f64; 4] {
        let (x1, y1) = self.inverse_point(b[0], b[1]);
        let (x2, y2) = self.inverse_point(b[2], b[3]);
        let (w, h) = (self.original_width as f64, self.original_height as f64);
        [x1.clamp(0.0, w), y1.clamp(0.0, h), x2.clamp(0.0, w), y2.clamp(0.0, h)]
    }
}

fn scaled_size(width: usize, height: usize, scale: f64, target: usize) -> (usize, usize) {
    let nw = ((width as f64 * scale).round() as usize).clamp(1, target);
    let nh = ((height as f64 * scale).round() as usize).clamp(1, target);
    (nw, nh)
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    img.ensure_non_empty("resize_bilinear")?;
    if new_w == 0 || new_h == 0 {
        return Err(Error::invalid("resize_bilinear: empty target size"));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let sx = w as f64 / new_w as f64;
    let sy = h as f64 / new_h as f64;
    let taps = |dst: usize, s: f64, len: usize| {
        let p = ((dst as f64 + 0.5) * s - 0.5).max(0.0);
        let i0 = (p.floor() as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, (p - i0 as f64) as f32)
    };
    let xs: Vec<_> = (0..new_w).map(|x| taps(x, sx, w)).collect();
    let src = img.data();
    let mut out = Vec::with_capacity(new_w * new_h * ch);
    for y in 0..new_h {
        let (y0, y1, fy) = taps(y, sy, h);
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let p = |xx: usize, yy: usize| src[(yy * w + xx) * ch + c] as f32;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push((top * (1.0 - fy) + bot * fy + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(new_w, new_h, ch, out)
}

/// Aspect-preserving resize onto a `target` x `target` canvas, padding the
/// shorter side symmetrically with `pad_value`.
pub fn letterbox_square(img: &Image, target: usize, pad_value: u8) -> Result<(Image, LetterboxTransform)> {
    img.ensure_non_empty("letterbox_square")?;
    let t = LetterboxTransform::for_size(img.width(), img.height(), target)?;
    if img.width() == target && img.height() == target {
        return Ok((img.clone(), LetterboxTransform::identity(target, target)));
    }
    let (nw, nh) = scaled_size(img.width(), img.height(), t.scale, target);
    let resized = resize_bilinear(img, nw, nh)?;
    let ch = img.channels();
    let mut canvas = Image::filled(target, target, ch, pad_value);
    let row = nw * ch;
    for y in 0..nh {
        let dst = ((y + t.pad_top) * target + t.pad_left) * ch;
        canvas.data_mut()[dst..dst + row].copy_from_slice(&resized.data()[y * row..(y + 1) * row]);
    }
    Ok((canvas, t))
}
