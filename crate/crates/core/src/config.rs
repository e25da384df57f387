//! Service configuration file (JSON). Every section and key is optional and
//! falls back to its default; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assist::{AssistConfig, SpeechTemplates};
use crate::error::{Error, Result};
use crate::features::FeatureSource;
use crate::head::{DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU};
use crate::imgproc::PreprocessConfig;

pub const DEFAULT_PORT: u16 = 8765;
pub const DEFAULT_MAX_FRAME_BYTES: usize = 2 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub port: u16,
    pub bind: String,
    pub max_frame_bytes: usize,
    /// Directory served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: DEFAULT_PORT,
            bind: "127.0.0.1".into(),
            max_frame_bytes: DEFAULT_MAX_FRAME_BYTES,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub source: FeatureSource,
    pub dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig { source: FeatureSource::Mock, dir: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSection {
    /// `DNM1` weights; a seeded random head is used when absent.
    pub weights: Option<PathBuf>,
    pub p5_channels: usize,
    pub seed: u64,
    pub conf_threshold: f64,
    pub nms_iou: f64,
}

impl Default for HeadSection {
    fn default() -> Self {
        HeadSection {
            weights: None,
            p5_channels: 256,
            seed: 0,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            nms_iou: DEFAULT_NMS_IOU,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeaturesConfig,
    pub head: HeadSection,
    pub assist: AssistConfig,
    pub speech: SpeechTemplates,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let p = &self.preprocess;
        if p.gaussian_kernel < 3 || p.gaussian_kernel % 2 == 0 {
            return bad(format!("preprocess.gaussian_kernel must be odd and >= 3, got {}", p.gaussian_kernel));
        }
        if !(p.clahe_clip > 0.0) || p.clahe_tiles.contains(&0) {
            return bad("preprocess.clahe_clip must be positive and clahe_tiles non-zero".into());
        }
        if self.features.source == FeatureSource::File && self.features.dir.is_none() {
            return bad("features.dir is required when features.source is \"file\"".into());
        }
        for (key, v) in [
            ("head.conf_threshold", self.head.conf_threshold),
            ("head.nms_iou", self.head.nms_iou),
            ("assist.conf_threshold", self.assist.conf_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{key} must lie in [0, 1], got {v}"));
            }
        }
        if self.server.max_frame_bytes == 0 {
            return bad("server.max_frame_bytes must be positive".into());
        }
        Ok(())
    }
}
