//! 8-bit BGR <-> CIE L*a*b* (D65) conversion.
//!
//! Constants:
//!
//! - sRGB transfer: `c <= 0.04045 ? c / 12.92 : ((c + 0.055) / 1.055)^2.4`
//! - RGB -> XYZ rows `[0.412453 0.357580 0.180423]`,
//!   `[0.212671 0.715160 0.072169]`, `[0.019334 0.119193 0.950227]`
//! - white point `Xn = 0.950456`, `Yn = 1`, `Zn = 1.088754`
//! - `f(t) = t^(1/3)` for `t > 0.008856`, else `7.787 t + 16/116`
//! - 8-bit encoding: `L8 = L * 255 / 100`, `a8 = a + 128`, `b8 = b + 128`
//!
//! The planes are kept in `f64` between conversions so an untouched image
//! survives BGR -> LAB -> BGR without quantization drift.

use std::sync::OnceLock;

use super::Image;

const XN: f64 = 0.950456;
const ZN: f64 = 1.088754;
const T0: f64 = 0.008856;
const F0: f64 = 0.206893;
const KAPPA: f64 = 7.787;
const OFFSET: f64 = 16.0 / 116.0;

/// Floating-point LAB planes: `l` in `[0, 100]`, `a`/`b` roughly `[-128, 127]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabPlanes {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabPlanes {
    /// Lightness quantized to the 8-bit range `L * 255 / 100`.
    pub fn l8(&self) -> Vec<u8> {
        self.l
            .iter()
            .map(|&l| (l * 2.55 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn f(t: f64) -> f64 {
    if t > T0 {
        t.cbrt()
    } else {
        KAPPA * t + OFFSET
    }
}

fn f_inv(v: f64) -> f64 {
    if v > F0 {
        v * v * v
    } else {
        (v - OFFSET) / KAPPA
    }
}

fn encode_u8(c: f64) -> u8 {
    (linear_to_srgb(c.clamp(0.0, 1.0)) * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Linear value of every 8-bit code.
fn decode_table() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|v| srgb_to_linear(v as f64 / 255.0)))
}

/// `thresholds[k]` is the smallest linear value that encodes to at least
/// `k`, found by bisection over the ordered bit patterns of non-negative
/// doubles, so table lookups agree with [`encode_u8`] exactly.
fn encode_thresholds() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        std::array::from_fn(|k| {
            if k == 0 {
                return f64::NEG_INFINITY;
            }
            let (mut lo, mut hi) = (0u64, 1f64.to_bits());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if (encode_u8(f64::from_bits(mid)) as usize) < k {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            f64::from_bits(lo)
        })
    })
}

const BUCKETS: usize = 1 << 13;

/// Code at the start of each of `BUCKETS` equal slices of `[0, 1]`. The
/// steepest part of the curve moves under one code per slice, so one
/// threshold comparison finishes the lookup.
fn bucket_codes() -> &'static [u8] {
    static TABLE: OnceLock<Vec<u8>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=BUCKETS).map(|i| encode_u8(i as f64 / BUCKETS as f64)).collect())
}

fn encode_fast(c: f64) -> u8 {
    if !(c > 0.0) {
        return encode_u8(c);
    }
    if c >= 1.0 {
        return 255;
    }
    let thresholds = encode_thresholds();
    let mut k = bucket_codes()[(c * BUCKETS as f64) as usize] as usize;
    while k < 255 && thresholds[k + 1] <= c {
        k += 1;
    }
    k as u8
}

pub fn bgr_pixel_to_lab(bgr: [u8; 3]) -> [f64; 3] {
    let table = decode_table();
    let b = table[bgr[0] as usize];
    let g = table[bgr[1] as usize];
    let r = table[bgr[2] as usize];
    let x = (0.412453 * r + 0.357580 * g + 0.180423 * b) / XN;
    let y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
    let z = (0.019334 * r + 0.119193 * g + 0.950227 * b) / ZN;
    let fy = f(y);
    let l = if y > T0 { 116.0 * fy - 16.0 } else { 903.3 * y };
    [l, 500.0 * (f(x) - fy), 200.0 * (fy - f(z))]
}

pub fn lab_pixel_to_bgr(lab: [f64; 3]) -> [u8; 3] {
    let [l, a, b] = lab;
    let fy = (l + 16.0) / 116.0;
    let y = if l > 903.3 * T0 { fy * fy * fy } else { l / 903.3 };
    let x = f_inv(fy + a / 500.0) * XN;
    let z = f_inv(fy - b / 200.0) * ZN;
    let r = 3.240479 * x - 1.537150 * y - 0.498535 * z;
    let g = -0.969256 * x + 1.875991 * y + 0.041556 * z;
    let bl = 0.055648 * x - 0.204043 * y + 1.057311 * z;
    [encode_fast(bl), encode_fast(g), encode_fast(r)]
}

/// Converts a 3-channel BGR image; caller guarantees the channel count.
pub fn bgr_to_lab(img: &Image) -> LabPlanes {
    debug_assert_eq!(img.channels(), 3);
    let n = img.width() * img.height();
    let mut planes = LabPlanes {
        width: img.width(),
        height: img.height(),
        l: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
    };
    for px in img.data().chunks_exact(3) {
        let [l, a, b] = bgr_pixel_to_lab([px[0], px[1], px[2]]);
        planes.l.push(l);
        planes.a.push(a);
        planes.b.push(b);
    }
    planes
}

pub fn lab_to_bgr(planes: &LabPlanes) -> Image {
    let mut data = Vec::with_capacity(planes.l.len() * 3);
    for i in 0..planes.l.len() {
        data.extend_from_slice(&lab_pixel_to_bgr([planes.l[i], planes.a[i], planes.b[i]]));
    }
    Image::new(planes.width, planes.height, 3, data).expect("plane sizes agree")
}
