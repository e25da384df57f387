//! Pipeline timing over synthetic camera frames.

use std::fmt;

use denom_core::imgproc::Image;
use denom_core::pipeline::{Detector, StageTimings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Stat {
    /// Mean and nearest-rank percentiles.
    pub fn of(samples: &[f64]) -> Stat {
        assert!(!samples.is_empty());
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Stat { mean: s.iter().sum::<f64>() / s.len() as f64, p50: rank(0.5), p95: rank(0.95) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub frames: usize,
    pub frame_size: (usize, usize),
    pub input_size: usize,
    pub pre: Stat,
    pub inf: Stat,
    pub post: Stat,
    pub total: Stat,
    pub detections: usize,
}

/// A camera-like frame: a lit gradient with a darker note-sized block and
/// sensor noise.
pub fn synthetic_frame(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Image {
    let (bx, by) = (rng.gen_range(0..width / 2), rng.gen_range(0..height / 2));
    let noise: Vec<i16> = (0..width * height * 3).map(|_| rng.gen_range(-12..=12)).collect();
    Image::from_fn(width, height, 3, |x, y, c| {
        let base = 150 + (x * 60 / width) as i16 - (y * 40 / height) as i16;
        let note = if (bx..bx + width / 2).contains(&x) && (by..by + height / 3).contains(&y) { -70 + 10 * c as i16 } else { 0 };
        (base + note + noise[(y * width + x) * 3 + c]).clamp(0, 255) as u8
    })
}

pub const DEFAULT_FRAME_SIZE: (usize, usize) = (640, 640);

pub fn run_bench(detector: &Detector, frames: usize, frame_size: (usize, usize), seed: u64) -> denom_core::Result<BenchReport> {
    let (w, h) = frame_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images: Vec<Image> = (0..frames.max(1)).map(|_| synthetic_frame(w, h, &mut rng)).collect();
    // one untimed warm-up pass
    detector.detect(&images[0])?;
    let mut t: Vec<StageTimings> = Vec::with_capacity(images.len());
    let mut detections = 0;
    for img in &images {
        let r = detector.detect(img)?;
        detections += r.detections.len();
        t.push(r.timing_ms);
    }
    let col = |f: fn(&StageTimings) -> f64| Stat::of(&t.iter().map(f).collect::<Vec<_>>());
    Ok(BenchReport {
        frames: images.len(),
        frame_size: (w, h),
        input_size: detector.input_size(),
        pre: col(|s| s.pre),
        inf: col(|s| s.inf),
        post: col(|s| s.post),
        total: col(|s| s.total),
        detections,
    })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} frames of {}x{}, letterboxed to {n}x{n}, {} detections",
            self.frames, self.frame_size.0, self.frame_size.1, self.detections,
            n = self.input_size
        )?;
        writeln!(f, "{:<6} {:>9} {:>9} {:>9}", "stage", "mean ms", "p50 ms", "p95 ms")?;
        for (name, s) in [("pre", self.pre), ("inf", self.inf), ("post", self.post), ("total", self.total)] {
            writeln!(f, "{:<6} {:>9.2} {:>9.2} {:>9.2}", name, s.mean, s.p50, s.p95)?;
        }
        write!(
            f,
            "Speed: {:.1}ms preprocess, {:.1}ms inference, {:.1}ms postprocess per image at shape (1, 3, {n}, {n})",
            self.pre.mean,
            self.inf.mean,
            self.post.mean,
            n = self.input_size
        )
    }
}
