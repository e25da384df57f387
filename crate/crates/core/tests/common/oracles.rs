//! Independent reference implementations written from the definitions.

use denom_core::head::{iou, Detection};
use denom_core::imgproc::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn srgb_lin(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn lin_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn ref_to_lab(px: &[u8]) -> [f64; 3] {
    let (b, g, r) = (srgb_lin(px[0] as f64 / 255.0), srgb_lin(px[1] as f64 / 255.0), srgb_lin(px[2] as f64 / 255.0));
    let x = (0.412453 * r + 0.357580 * g + 0.180423 * b) / 0.950456;
    let y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
    let z = (0.019334 * r + 0.119193 * g + 0.950227 * b) / 1.088754;
    let f = |t: f64| if t > 0.008856 { t.cbrt() } else { 7.787 * t + 16.0 / 116.0 };
    let l = if y > 0.008856 { 116.0 * y.cbrt() - 16.0 } else { 903.3 * y };
    [l, 500.0 * (f(x) - f(y)), 200.0 * (f(y) - f(z))]
}

pub fn ref_to_bgr(lab: [f64; 3]) -> [u8; 3] {
    let [l, a, b] = lab;
    let fy = (l + 16.0) / 116.0;
    let inv = |v: f64| if v > 0.206893 { v * v * v } else { (v - 16.0 / 116.0) / 7.787 };
    let y = if l > 903.3 * 0.008856 { fy * fy * fy } else { l / 903.3 };
    let x = inv(fy + a / 500.0) * 0.950456;
    let z = inv(fy - b / 200.0) * 1.088754;
    let r = 3.240479 * x - 1.537150 * y - 0.498535 * z;
    let g = -0.969256 * x + 1.875991 * y + 0.041556 * z;
    let bl = 0.055648 * x - 0.204043 * y + 1.057311 * z;
    let enc = |c: f64| (lin_srgb(c.clamp(0.0, 1.0)) * 255.0).round().clamp(0.0, 255.0) as u8;
    [enc(bl), enc(g), enc(r)]
}

/// Contrast-limited equalization of one tile, straight from the definition.
pub fn ref_tile_lut(tile: &[u8], clip_limit: f64, lo: usize, hi: usize) -> Vec<f64> {
    let mut hist = vec![0.0; 256];
    for &v in tile {
        hist[v as usize] += 1.0;
    }
    let n = tile.len() as f64;
    let limit = f64::max(1.0, clip_limit * n / 256.0);
    let excess: f64 = hist.iter().map(|&h| f64::max(h - limit, 0.0)).sum();
    let share = excess / (hi - lo + 1) as f64;
    let clipped: Vec<f64> = (0..256).map(|v| if v >= lo && v <= hi { hist[v].min(limit) + share } else { 0.0 }).collect();
    let cdf: Vec<f64> = clipped.iter().scan(0.0, |s, &h| { *s += h; Some(*s) }).collect();
    let cdf_min = cdf[lo..=hi].iter().copied().find(|&c| c > 0.0).unwrap();
    (0..256)
        .map(|v| {
            if v < lo || v > hi {
                v as f64
            } else {
                lo as f64 + (hi - lo) as f64 * ((cdf[v] - cdf_min) / (n - cdf_min)).max(0.0)
            }
        })
        .collect()
}

pub fn ref_clahe(img: &Image, clip_limit: f64, tiles: usize) -> Image {
    let (w, h) = (img.width(), img.height());
    let labs: Vec<[f64; 3]> = img.data().chunks(3).map(ref_to_lab).collect();
    let l8: Vec<u8> = labs.iter().map(|p| (p[0] * 2.55).round().clamp(0.0, 255.0) as u8).collect();
    let (lo, hi) = (*l8.iter().min().unwrap() as usize, *l8.iter().max().unwrap() as usize);
    if lo == hi {
        return img.clone();
    }
    let xs: Vec<usize> = (0..=tiles).map(|i| i * w / tiles).collect();
    let ys: Vec<usize> = (0..=tiles).map(|i| i * h / tiles).collect();
    let mut luts = vec![vec![Vec::new(); tiles]; tiles];
    for (ty, row) in luts.iter_mut().enumerate() {
        for (tx, lut) in row.iter_mut().enumerate() {
            let mut tile = Vec::new();
            for y in ys[ty]..ys[ty + 1] {
                tile.extend_from_slice(&l8[y * w + xs[tx]..y * w + xs[tx + 1]]);
            }
            *lut = ref_tile_lut(&tile, clip_limit, lo, hi);
        }
    }
    // tile centers and clamped bilinear position in tile-index space
    let pos = |p: usize, b: &[usize]| -> (usize, usize, f64) {
        let c: Vec<f64> = (0..tiles).map(|i| (b[i] + b[i + 1]) as f64 / 2.0).collect();
        let q = p as f64 + 0.5;
        if q <= c[0] {
            return (0, 0, 0.0);
        }
        if q >= c[tiles - 1] {
            return (tiles - 1, tiles - 1, 0.0);
        }
        let i = (0..tiles - 1).find(|&i| q >= c[i] && q < c[i + 1]).unwrap();
        (i, i + 1, (q - c[i]) / (c[i + 1] - c[i]))
    };
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let (j0, j1, fy) = pos(y, &ys);
        for x in 0..w {
            let (i0, i1, fx) = pos(x, &xs);
            let v = l8[y * w + x] as usize;
            let m = (1.0 - fy) * ((1.0 - fx) * luts[j0][i0][v] + fx * luts[j0][i1][v])
                + fy * ((1.0 - fx) * luts[j1][i0][v] + fx * luts[j1][i1][v]);
            let mut lab = labs[y * w + x];
            lab[0] += (m - v as f64) / 2.55;
            out.extend_from_slice(&ref_to_bgr(lab));
        }
    }
    Image::new(w, h, 3, out).unwrap()
}

pub fn ref_convolve(img: &Image, kernel: &[Vec<f64>]) -> Vec<f64> {
    let (w, h, ch) = (img.width() as isize, img.height() as isize, img.channels());
    let r = (kernel.len() / 2) as isize;
    let mut out = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (ky, krow) in kernel.iter().enumerate() {
                    for (kx, kw) in krow.iter().enumerate() {
                        let sx = (x + kx as isize - r).clamp(0, w - 1) as usize;
                        let sy = (y + ky as isize - r).clamp(0, h - 1) as usize;
                        acc += kw * img.get(sx, sy, c) as f64;
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn analytic_gaussian(size: usize) -> Vec<Vec<f64>> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size).map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    (0..size).map(|i| (0..size).map(|j| g[i] * g[j] / (s * s)).collect()).collect()
}

pub fn fixture_gradient() -> Image {
    Image::from_fn(96, 72, 3, |x, y, c| match c {
        0 => (x * 255 / 95) as u8,
        1 => (y * 255 / 71) as u8,
        _ => (60 + (x + y) % 120) as u8,
    })
}

/// Low-contrast banknote-like pattern: stripes, a dark numeral block and noise.
pub fn fixture_note() -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noise: Vec<i32> = (0..128 * 80 * 3).map(|_| rng.gen_range(-10..=10)).collect();
    Image::from_fn(128, 80, 3, |x, y, c| {
        let base = [118.0, 140.0, 112.0][c];
        let stripes = 22.0 * ((x as f64) * 0.35).sin() * ((y as f64) * 0.12).cos();
        let numeral = if (20..52).contains(&x) && (18..60).contains(&y) { -60.0 } else { 0.0 };
        let v = base + stripes + numeral + noise[(y * 128 + x) * 3 + c] as f64;
        v.round().clamp(0.0, 255.0) as u8
    })
}

pub fn fixture_two_tone_noisy() -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Vec<i32> = (0..64 * 64 * 3).map(|_| rng.gen_range(-6..=6)).collect();
    Image::from_fn(64, 64, 3, |x, y, c| {
        let v = if x < 32 { 50 } else { 200 } + noise[(y * 64 + x) * 3 + c];
        v.clamp(0, 255) as u8
    })
}

/// VOC-style AP with sentinel points, written independently of the library.
pub fn ref_ap(scored: &[(f64, bool)], gt_count: usize) -> f64 {
    let mut s = scored.to_vec();
    s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut rec = vec![0.0];
    let mut pre = vec![0.0];
    let mut tp = 0.0;
    for (k, (_, hit)) in s.iter().enumerate() {
        if *hit {
            tp += 1.0;
        }
        rec.push(tp / gt_count as f64);
        pre.push(tp / (k + 1) as f64);
    }
    rec.push(1.0);
    pre.push(0.0);
    for i in (0..pre.len() - 1).rev() {
        pre[i] = pre[i].max(pre[i + 1]);
    }
    (1..rec.len()).filter(|&i| rec[i] != rec[i - 1]).map(|i| (rec[i] - rec[i - 1]) * pre[i]).sum()
}

/// The greedy result is the unique subset where a detection is kept exactly
/// when no higher-ranked kept detection of its class overlaps it.
pub fn exhaustive_nms(dets: &[Detection], thr: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&dets[i], &dets[j]);
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then(a.bbox[0].partial_cmp(&b.bbox[0]).unwrap())
            .then(a.bbox[1].partial_cmp(&b.bbox[1]).unwrap())
    });
    let n = dets.len();
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let kept = |r: usize| mask & (1 << r) != 0;
        let consistent = (0..n).all(|r| {
            let blocked = (0..r).any(|q| {
                kept(q) && dets[order[q]].class_id == dets[order[r]].class_id && iou(&dets[order[q]].bbox, &dets[order[r]].bbox) >= thr
            });
            kept(r) == !blocked
        });
        if consistent {
            found.push((0..n).filter(|&r| kept(r)).map(|r| dets[order[r]]).collect::<Vec<_>>());
        }
    }
    assert_eq!(found.len(), 1);
    found.pop().unwrap()
}
