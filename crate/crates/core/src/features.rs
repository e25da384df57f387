//! Multi-scale feature provider standing in for the unmodified backbone and
//! neck.
//!
//! Two sources exist. The mock backbone projects each 8x8 BGR patch through a
//! fixed seeded random matrix and average-pools the patch vectors by 2x2 and
//! 4x4 for the coarser scales. The file source reads `DNM1` containers with
//! entries `P3`, `P4`, `P5`.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::head::{HeadConfig, NUM_SCALES, SCALE_NAMES, STRIDES};
use crate::imgproc::Image;
use crate::tensor::{Scalar, Tensor};

const PATCH: usize = STRIDES[0];
const PATCH_DIM: usize = PATCH * PATCH * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Mock,
    File,
}

/// P3, P4, P5 maps for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub p3: Tensor<f32>,
    pub p4: Tensor<f32>,
    pub p5: Tensor<f32>,
    pub source: FeatureSource,
}

impl FeatureSet {
    /// Checks rank, batch agreement and the 2x halving between scales.
    pub fn new(p3: Tensor<f32>, p4: Tensor<f32>, p5: Tensor<f32>, source: FeatureSource) -> Result<Self> {
        let fs = FeatureSet { p3, p4, p5, source };
        let dims: Vec<[usize; 4]> = fs
            .scales()
            .iter()
            .zip(SCALE_NAMES)
            .map(|(t, name)| {
                let s = t.shape();
                if s.len() != 4 {
                    return Err(Error::format(name, format!("expected rank 4, found shape {s:?}")));
                }
                Ok([s[0], s[1], s[2], s[3]])
            })
            .collect::<Result<_>>()?;
        let g = dims[0][2];
        for (s, d) in dims.iter().enumerate() {
            let expected = g >> s;
            if d[0] != dims[0][0] || d[2] != expected || d[3] != expected || d[1] == 0 || expected == 0 {
                return Err(Error::format(
                    SCALE_NAMES[s],
                    format!("expected [{}, C, {expected}, {expected}], found {:?}", dims[0][0], d),
                ));
            }
        }
        Ok(fs)
    }

    pub fn scales(&self) -> [&Tensor<f32>; NUM_SCALES] {
        [&self.p3, &self.p4, &self.p5]
    }

    pub fn into_vec(self) -> Vec<Tensor<f32>> {
        vec![self.p3, self.p4, self.p5]
    }

    pub fn batch(&self) -> usize {
        self.p3.shape()[0]
    }

    /// Grid sizes and channel widths must match `config` exactly.
    pub fn check_config(&self, config: &HeadConfig) -> Result<()> {
        for (s, t) in self.scales().into_iter().enumerate() {
            let g = config.grid(s);
            let expected = [self.batch(), config.in_channels[s], g, g];
            if t.shape() != expected {
                return Err(Error::format(
                    SCALE_NAMES[s],
                    format!("expected {expected:?}, found {:?}", t.shape()),
                ));
            }
        }
        Ok(())
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        for (t, name) in self.scales().into_iter().zip(SCALE_NAMES) {
            c.insert_tensor(name, t);
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        FeatureSet::new(c.tensor("P3")?, c.tensor("P4")?, c.tensor("P5")?, FeatureSource::File)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

pub fn file_features_save(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    fs.save(path)
}

pub fn file_features_load(path: impl AsRef<Path>) -> Result<FeatureSet> {
    FeatureSet::load(path)
}

/// Anything that turns a letterboxed frame into head inputs.
pub trait FeatureProvider: Send + Sync {
    fn extract(&self, img: &Image) -> Result<FeatureSet>;
}

/// Seeded random patch projection; see the module docs.
#[derive(Debug, Clone)]
pub struct MockBackbone {
    input_size: usize,
    /// `[C_s, PATCH_DIM]` row-major per scale.
    projections: Vec<Vec<f32>>,
    channels: [usize; NUM_SCALES],
}

impl MockBackbone {
    pub fn new(config: &HeadConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.input_size % STRIDES[NUM_SCALES - 1] != 0 {
            return Err(Error::invalid(format!(
                "mock backbone: input size {} is not a multiple of {}",
                config.input_size,
                STRIDES[NUM_SCALES - 1]
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = 2.0 / (PATCH_DIM as f64).sqrt();
        let projections = config
            .in_channels
            .iter()
            .map(|&c| Tensor::<f32>::randn(&[c, PATCH_DIM], std, &mut rng).into_data())
            .collect();
        Ok(MockBackbone { input_size: config.input_size, projections, channels: config.in_channels })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    fn check_image(&self, img: &Image) -> Result<()> {
        let n = self.input_size;
        if (img.width(), img.height(), img.channels()) != (n, n, 3) {
            return Err(Error::shape(
                "mock backbone input",
                (n, n, 3),
                (img.width(), img.height(), img.channels()),
            ));
        }
        Ok(())
    }

    pub fn extract(&self, img: &Image) -> Result<FeatureSet> {
        self.check_image(img)?;
        let g3 = self.input_size / PATCH;
        // patch matrix [cells, PATCH_DIM], centered intensities
        let mut x = vec![0f32; g3 * g3 * PATCH_DIM];
        let row = self.input_size * 3;
        for gy in 0..g3 {
            for gx in 0..g3 {
                let dst = &mut x[(gy * g3 + gx) * PATCH_DIM..][..PATCH_DIM];
                for py in 0..PATCH {
                    let src = &img.data()[(gy * PATCH + py) * row + gx * PATCH * 3..][..PATCH * 3];
                    for (d, &v) in dst[py * PATCH * 3..][..PATCH * 3].iter_mut().zip(src) {
                        *d = v as f32 / 255.0 - 0.5;
                    }
                }
            }
        }
        let mut pooled = vec![x];
        for s in 1..NUM_SCALES {
            let g = g3 >> s;
            let prev = &pooled[s - 1];
            let mut next = vec![0f32; g * g * PATCH_DIM];
            for gy in 0..g {
                for gx in 0..g {
                    let dst = &mut next[(gy * g + gx) * PATCH_DIM..][..PATCH_DIM];
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let src = &prev[((2 * gy + dy) * 2 * g + 2 * gx + dx) * PATCH_DIM..][..PATCH_DIM];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += 0.25 * v;
                        }
                    }
                }
            }
            pooled.push(next);
        }
        let maps: Vec<Tensor<f32>> = (0..NUM_SCALES)
            .map(|s| {
                let (c, g) = (self.channels[s], g3 >> s);
                let mut out = vec![0f32; c * g * g];
                // [c, PATCH_DIM] x [cells, PATCH_DIM]^T
                f32::gemm(c, PATCH_DIM, g * g, &self.projections[s], (PATCH_DIM, 1), &pooled[s], (1, PATCH_DIM), 0.0, &mut out);
                Tensor::from_vec(&[1, c, g, g], out)
            })
            .collect::<Result<_>>()?;
        let mut it = maps.into_iter();
        let (p3, p4, p5) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        FeatureSet::new(p3, p4, p5, FeatureSource::Mock)
    }
}

impl FeatureProvider for MockBackbone {
    fn extract(&self, img: &Image) -> Result<FeatureSet> {
        MockBackbone::extract(self, img)
    }
}

/// Mock features with the default head widths (P5 = 256) for a 640x640 frame.
pub fn mock_extract(img: &Image, seed: u64) -> Result<FeatureSet> {
    MockBackbone::new(&HeadConfig::default(), seed)?.extract(img)
}

/// Replays precomputed feature files from a directory in name order, one per
/// call, cycling. The frame content is ignored.
#[derive(Debug)]
pub struct FileReplay {
    files: Vec<PathBuf>,
    next: std::sync::atomic::AtomicUsize,
}

impl FileReplay {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "dnm"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("features.dir {} holds no .dnm files", dir.display())));
        }
        Ok(FileReplay { files, next: Default::default() })
    }
}

impl FeatureProvider for FileReplay {
    fn extract(&self, _img: &Image) -> Result<FeatureSet> {
        let i = self.next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        FeatureSet::load(&self.files[i % self.files.len()])
    }
}
