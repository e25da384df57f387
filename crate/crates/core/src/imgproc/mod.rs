//! Frame preprocessing: Gaussian blur, LAB-space CLAHE, cross sharpening and
//! white letterboxing. All operations are pure functions on owned buffers.

mod clahe;
mod filter;
mod image;
pub mod lab;
mod letterbox;

use serde::{Deserialize, Serialize};

pub use self::clahe::{clahe_enhance, clahe_plane, tile_bounds, DEFAULT_CLIP_LIMIT, DEFAULT_TILES};
pub use self::filter::{gaussian_blur, gaussian_kernel_1d, gaussian_sigma, sharpen, DEFAULT_GAUSSIAN_KERNEL};
pub use self::image::{Image, MAX_DECODE_DIM};
pub use self::letterbox::{letterbox_square, resize_bilinear, LetterboxTransform, DEFAULT_TARGET, WHITE};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub enabled: bool,
    pub gaussian_kernel: usize,
    pub clahe_clip: f64,
    pub clahe_tiles: [usize; 2],
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            enabled: true,
            gaussian_kernel: DEFAULT_GAUSSIAN_KERNEL,
            clahe_clip: DEFAULT_CLIP_LIMIT,
            clahe_tiles: [DEFAULT_TILES.0, DEFAULT_TILES.1],
        }
    }
}

/// `sharpen(clahe_enhance(gaussian_blur(img)))` with the default constants.
pub fn preprocess_pipeline(img: &Image) -> Result<Image> {
    preprocess_with(img, &PreprocessConfig::default())
}

/// Same composition with explicit constants. When `enabled` is false the
/// input is returned as is.
pub fn preprocess_with(img: &Image, cfg: &PreprocessConfig) -> Result<Image> {
    img.ensure_color("preprocess_pipeline")?;
    if !cfg.enabled {
        return Ok(img.clone());
    }
    let blurred = gaussian_blur(img, cfg.gaussian_kernel)?;
    let enhanced = clahe_enhance(&blurred, cfg.clahe_clip, (cfg.clahe_tiles[0], cfg.clahe_tiles[1]))?;
    sharpen(&enhanced)
}
