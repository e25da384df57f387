use super::Image;
use crate::error::{Error, Result};

/// Default blur kernel size used by the preprocessing pipeline.
pub const DEFAULT_GAUSSIAN_KERNEL: usize = 5;

/// Standard deviation derived from kernel size:
/// `0.3 * ((ksize - 1) * 0.5 - 1) + 0.8`.
pub fn gaussian_sigma(kernel_size: usize) -> f64 {
    0.3 * ((kernel_size as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian weights; the 2-D kernel is their outer product.
pub fn gaussian_kernel_1d(kernel_size: usize) -> Vec<f64> {
    let sigma = gaussian_sigma(kernel_size);
    let center = (kernel_size / 2) as f64;
    let raw: Vec<f64> = (0..kernel_size)
        .map(|i| {
            let d = i as f64 - center;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Separable Gaussian blur with edge-replicated borders.
pub fn gaussian_blur(img: &Image, kernel_size: usize) -> Result<Image> {
    img.ensure_non_empty("gaussian_blur")?;
    if kernel_size < 3 || kernel_size % 2 == 0 {
        return Err(Error::invalid(format!(
            "gaussian_blur: kernel size must be odd and >= 3, got {kernel_size}"
        )));
    }
    let kernel: Vec<f32> = gaussian_kernel_1d(kernel_size)
        .into_iter()
        .map(|w| w as f32)
        .collect();
    let r = (kernel_size / 2) as isize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();

    // rows padded by edge replication so the taps index contiguously
    let mut horiz = vec![0f32; src.len()];
    let mut padded = vec![0f32; (w + 2 * r as usize) * ch];
    for y in 0..h {
        let row = &src[y * w * ch..(y + 1) * w * ch];
        for (px, slot) in padded.chunks_exact_mut(ch).enumerate() {
            let sx = clamp_index(px as isize - r, w);
            for c in 0..ch {
                slot[c] = row[sx * ch + c] as f32;
            }
        }
        let dst = &mut horiz[y * w * ch..(y + 1) * w * ch];
        for (i, d) in dst.iter_mut().enumerate() {
            let mut acc = 0f32;
            for (k, &kw) in kernel.iter().enumerate() {
                acc += kw * padded[i + k * ch];
            }
            *d = acc;
        }
    }

    let mut out = vec![0u8; src.len()];
    let stride = w * ch;
    for y in 0..h {
        let mut acc = vec![0f32; stride];
        for (k, &kw) in kernel.iter().enumerate() {
            let sy = clamp_index(y as isize + k as isize - r, h);
            for (a, &v) in acc.iter_mut().zip(&horiz[sy * stride..(sy + 1) * stride]) {
                *a += kw * v;
            }
        }
        for (o, a) in out[y * stride..(y + 1) * stride].iter_mut().zip(acc) {
            *o = to_u8(a);
        }
    }
    Image::new(w, h, ch, out)
}

/// 3x3 cross sharpening kernel `[[0,-1,0],[-1,5,-1],[0,-1,0]]`, applied per
/// channel with edge replication and clamped to `[0, 255]`.
pub fn sharpen(img: &Image) -> Result<Image> {
    img.ensure_non_empty("sharpen")?;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();
    let stride = w * ch;
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        let row = &src[y * stride..(y + 1) * stride];
        let up = &src[y.saturating_sub(1) * stride..][..stride];
        let down = &src[(y + 1).min(h - 1) * stride..][..stride];
        let dst = &mut out[y * stride..(y + 1) * stride];
        for i in 0..stride {
            let x = i / ch;
            let left = if x == 0 { i } else { i - ch };
            let right = if x + 1 == w { i } else { i + ch };
            let v = 5 * row[i] as i32 - up[i] as i32 - down[i] as i32 - row[left] as i32 - row[right] as i32;
            dst[i] = v.clamp(0, 255) as u8;
        }
    }
    Image::new(w, h, ch, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_for_default_kernel() {
        assert!((gaussian_sigma(5) - 1.1).abs() < 1e-12);
        let k = gaussian_kernel_1d(5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[4]);
        assert!(k[2] > k[1] && k[1] > k[0]);
    }

    #[test]
    fn constant_images_are_fixed_points() {
        for ch in [1, 3] {
            let img = Image::filled(13, 9, ch, 128);
            assert_eq!(gaussian_blur(&img, 5).unwrap(), img);
            assert_eq!(sharpen(&img).unwrap(), img);
        }
    }

    #[test]
    fn bad_kernel_sizes() {
        let img = Image::filled(4, 4, 1, 0);
        for k in [0, 1, 2, 4] {
            assert!(matches!(gaussian_blur(&img, k), Err(Error::InvalidArgument(_))));
        }
        assert!(gaussian_blur(&Image::filled(0, 0, 3, 0), 5).is_err());
        assert!(sharpen(&Image::filled(0, 3, 3, 0)).is_err());
    }

    #[test]
    fn step_edge_overshoots() {
        let img = Image::from_fn(8, 4, 1, |x, _, _| if x < 4 { 100 } else { 200 });
        let out = sharpen(&img).unwrap();
        // 5*100 - 3*100 - 200 = 0 ; 5*200 - 3*200 - 100 = 300 -> 255
        assert_eq!(out.get(3, 2, 0), 0);
        assert_eq!(out.get(4, 2, 0), 255);
        assert_eq!(out.get(1, 2, 0), 100);
        assert_eq!(out.get(6, 2, 0), 200);
    }
}
