//! Contrast-limited adaptive histogram equalization on the LAB lightness
//! channel.
//!
//! Per tile: a 256-bin histogram of the 8-bit lightness is clipped at
//! `max(1, clip_limit * tile_pixels / 256)`; the clipped excess is spread
//! evenly over the bins spanning the image's lightness range `[lo, hi]`; the
//! tile mapping is `lo + (hi - lo) * (cdf(v) - cdf_min) / (N - cdf_min)`.
//! Mappings of the four nearest tile centers are blended bilinearly. The
//! output never leaves `[lo, hi]`, so constant images are fixed points.

use super::lab::{bgr_to_lab, lab_to_bgr};
use super::Image;
use crate::error::{Error, Result};

pub const DEFAULT_CLIP_LIMIT: f64 = 5.0;
pub const DEFAULT_TILES: (usize, usize) = (8, 8);

/// Tile boundaries `floor(i * len / tiles)` for `i = 0..=tiles`.
pub fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Clipped, redistributed, range-limited equalization lookup for one tile.
pub fn tile_mapping(values: impl Iterator<Item = u8>, clip_limit: f64, lo: u8, hi: u8) -> [f64; 256] {
    let mut hist = [0f64; 256];
    let mut n = 0usize;
    for v in values {
        hist[v as usize] += 1.0;
        n += 1;
    }
    let mut lut = [0f64; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = v as f64;
    }
    if n == 0 || lo == hi {
        return lut;
    }
    let clip = (clip_limit * n as f64 / 256.0).max(1.0);
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > clip {
            excess += *h - clip;
            *h = clip;
        }
    }
    let (lo_i, hi_i) = (lo as usize, hi as usize);
    let per_bin = excess / (hi_i - lo_i + 1) as f64;
    let mut cdf = 0.0;
    let mut cdf_min = None;
    let mut cdfs = [0f64; 256];
    for v in lo_i..=hi_i {
        cdf += hist[v] + per_bin;
        cdfs[v] = cdf;
        if cdf_min.is_none() && cdf > 0.0 {
            cdf_min = Some(cdf);
        }
    }
    let total = cdf;
    let cdf_min = cdf_min.unwrap_or(0.0);
    let denom = total - cdf_min;
    if denom <= 1e-9 {
        return lut;
    }
    let range = (hi_i - lo_i) as f64;
    for v in lo_i..=hi_i {
        let t = ((cdfs[v] - cdf_min) / denom).max(0.0);
        lut[v] = lo as f64 + range * t;
    }
    lut
}

/// Equalizes an 8-bit plane; returns the (unrounded) mapped values.
pub fn clahe_plane(
    plane: &[u8],
    width: usize,
    height: usize,
    clip_limit: f64,
    tiles: (usize, usize),
) -> Result<Vec<f64>> {
    let (tx, ty) = tiles;
    if tx == 0 || ty == 0 {
        return Err(Error::invalid("clahe: tile grid must be non-empty"));
    }
    if width < tx || height < ty {
        return Err(Error::invalid(format!(
            "clahe: image {width}x{height} smaller than tile grid {tx}x{ty}"
        )));
    }
    if plane.len() != width * height {
        return Err(Error::shape("clahe plane", width * height, plane.len()));
    }
    if !(clip_limit > 0.0 && clip_limit.is_finite()) {
        return Err(Error::invalid(format!("clahe: clip limit must be positive, got {clip_limit}")));
    }
    let lo = *plane.iter().min().expect("non-empty");
    let hi = *plane.iter().max().expect("non-empty");
    if lo == hi {
        return Ok(plane.iter().map(|&v| v as f64).collect());
    }

    let xb = tile_bounds(width, tx);
    let yb = tile_bounds(height, ty);
    let mut luts = Vec::with_capacity(tx * ty);
    for j in 0..ty {
        for i in 0..tx {
            let values = (yb[j]..yb[j + 1])
                .flat_map(|y| plane[y * width + xb[i]..y * width + xb[i + 1]].iter().copied());
            luts.push(tile_mapping(values, clip_limit, lo, hi));
        }
    }
    let xc: Vec<f64> = (0..tx).map(|i| (xb[i] + xb[i + 1]) as f64 / 2.0).collect();
    let yc: Vec<f64> = (0..ty).map(|j| (yb[j] + yb[j + 1]) as f64 / 2.0).collect();
    let xw: Vec<(usize, usize, f64)> = (0..width).map(|x| neighbors(&xc, x as f64 + 0.5)).collect();

    let mut out = vec![0f64; plane.len()];
    for y in 0..height {
        let (j0, j1, wy) = neighbors(&yc, y as f64 + 0.5);
        for x in 0..width {
            let (i0, i1, wx) = xw[x];
            let v = plane[y * width + x] as usize;
            let top = luts[j0 * tx + i0][v] * (1.0 - wx) + luts[j0 * tx + i1][v] * wx;
            let bottom = luts[j1 * tx + i0][v] * (1.0 - wx) + luts[j1 * tx + i1][v] * wx;
            out[y * width + x] = top * (1.0 - wy) + bottom * wy;
        }
    }
    Ok(out)
}

/// Indices of the two centers bracketing `p` and the weight of the second.
fn neighbors(centers: &[f64], p: f64) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|&c| c <= p) - 1;
    let w = (p - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, w as f64)
}

/// BGR -> LAB, CLAHE on L only, merge with untouched A/B, LAB -> BGR.
pub fn clahe_enhance(img: &Image, clip_limit: f64, tiles: (usize, usize)) -> Result<Image> {
    img.ensure_color("clahe_enhance")?;
    let mut lab = bgr_to_lab(img);
    let l8 = lab.l8();
    let mapped = clahe_plane(&l8, img.width(), img.height(), clip_limit, tiles)?;
    for ((l, &orig), new) in lab.l.iter_mut().zip(&l8).zip(&mapped) {
        *l += (new - orig as f64) / 2.55;
    }
    Ok(lab_to_bgr(&lab))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_gray_is_unchanged() {
        let img = Image::filled(64, 64, 3, 128);
        assert_eq!(clahe_enhance(&img, 5.0, (8, 8)).unwrap(), img);
    }

    #[test]
    fn grayscale_rejected() {
        let img = Image::filled(16, 16, 1, 10);
        assert!(matches!(clahe_enhance(&img, 5.0, (8, 8)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn too_small_for_grid() {
        let img = Image::filled(7, 16, 3, 10);
        assert!(clahe_enhance(&img, 5.0, (8, 8)).is_err());
    }

    #[test]
    fn mapping_stays_in_range() {
        let plane: Vec<u8> = (0..32 * 32).map(|i| (40 + (i * 7919) % 120) as u8).collect();
        let out = clahe_plane(&plane, 32, 32, 5.0, (4, 4)).unwrap();
        assert!(out.iter().all(|&v| (40.0..=159.0 + 1e-3).contains(&v)));
    }

    #[test]
    fn narrow_tile_range_is_stretched() {
        // left half low contrast texture, right half bright
        let plane: Vec<u8> = (0..64 * 64)
            .map(|i| {
                let (x, y) = (i % 64, i / 64);
                if x < 32 { 100 + ((x + y) % 4) as u8 } else { 220 }
            })
            .collect();
        let out = clahe_plane(&plane, 64, 64, 5.0, (8, 8)).unwrap();
        let spread = |xs: &[f64]| xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
        let before: Vec<f64> = (0..16).map(|x| plane[20 * 64 + x] as f64).collect();
        let after: Vec<f64> = (0..16).map(|x| out[20 * 64 + x]).collect();
        assert!(spread(&after) > spread(&before));
    }
}
