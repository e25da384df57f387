//! The per-frame detection chain shared by the service and the CLI:
//! letterbox, preprocess, features, head, decode, NMS, with wall-clock
//! timing in three buckets (pre, inf, post).

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Result;
use crate::features::{FeatureProvider, FeatureSet, FeatureSource, FileReplay, MockBackbone};
use crate::head::{decode, nms, DetectionHead, Detection, HeadConfig};
use crate::imgproc::{letterbox_square, preprocess_with, Image, LetterboxTransform, PreprocessConfig, WHITE};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub pre: f64,
    pub inf: f64,
    pub post: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// Boxes in the coordinates of the submitted image.
    pub detections: Vec<Detection>,
    pub timing_ms: StageTimings,
}

pub struct Detector {
    head: DetectionHead<f32>,
    provider: Arc<dyn FeatureProvider>,
    preprocess: PreprocessConfig,
    conf_threshold: f64,
    nms_iou: f64,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl Detector {
    pub fn new(
        head: DetectionHead<f32>,
        provider: Arc<dyn FeatureProvider>,
        preprocess: PreprocessConfig,
        conf_threshold: f64,
        nms_iou: f64,
    ) -> Self {
        Detector { head, provider, preprocess, conf_threshold, nms_iou }
    }

    /// Head from `head.weights` (or seeded init) and the configured feature source.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let head_cfg = HeadConfig::with_p5(cfg.head.p5_channels);
        let head = match &cfg.head.weights {
            Some(path) => DetectionHead::load(head_cfg.clone(), path)?,
            None => DetectionHead::init(head_cfg.clone(), cfg.head.seed)?,
        };
        let provider: Arc<dyn FeatureProvider> = match cfg.features.source {
            FeatureSource::Mock => Arc::new(MockBackbone::new(&head_cfg, cfg.features.seed)?),
            FeatureSource::File => Arc::new(FileReplay::open(cfg.features.dir.as_deref().expect("validated"))?),
        };
        Ok(Detector::new(head, provider, cfg.preprocess.clone(), cfg.head.conf_threshold, cfg.head.nms_iou))
    }

    pub fn head(&self) -> &DetectionHead<f32> {
        &self.head
    }

    pub fn input_size(&self) -> usize {
        self.head.config().input_size
    }

    /// Head, decode and NMS on ready-made features, in network-input pixels.
    pub fn detect_features(&self, features: &FeatureSet) -> Result<Vec<Detection>> {
        features.check_config(self.head.config())?;
        let raw = self.head.forward(&[features.p3.clone(), features.p4.clone(), features.p5.clone()])?;
        Ok(nms(&decode(&raw, self.head.config(), self.conf_threshold)?, self.nms_iou))
    }

    pub fn detect(&self, img: &Image) -> Result<FrameResult> {
        self.run(img, None)
    }

    /// As [`Detector::detect`] with `features` standing in for the provider;
    /// `img` still fixes the letterbox that maps boxes back.
    pub fn detect_with_features(&self, img: &Image, features: &FeatureSet) -> Result<FrameResult> {
        self.run(img, Some(features))
    }

    fn run(&self, img: &Image, given: Option<&FeatureSet>) -> Result<FrameResult> {
        let start = Instant::now();
        let img3;
        let img = if img.channels() == 3 {
            img
        } else {
            img3 = Image::from_fn(img.width(), img.height(), 3, |x, y, _| img.get(x, y, 0));
            &img3
        };
        let (boxed, transform) = letterbox_square(img, self.input_size(), WHITE)?;
        let prepared = match given {
            Some(_) => boxed,
            None => preprocess_with(&boxed, &self.preprocess)?,
        };
        let pre = ms(start);

        let t = Instant::now();
        let features = match given {
            Some(fs) => fs.clone(),
            None => self.provider.extract(&prepared)?,
        };
        features.check_config(self.head.config())?;
        let raw = self.head.forward(&[features.p3, features.p4, features.p5])?;
        let inf = ms(t);

        let t = Instant::now();
        let kept = nms(&decode(&raw, self.head.config(), self.conf_threshold)?, self.nms_iou);
        let detections = to_image_coords(kept, &transform);
        let post = ms(t);

        Ok(FrameResult { detections, timing_ms: StageTimings { pre, inf, post, total: ms(start) } })
    }
}

fn to_image_coords(dets: Vec<Detection>, t: &LetterboxTransform) -> Vec<Detection> {
    dets.into_iter()
        .filter_map(|d| {
            let bbox = t.inverse_box(d.bbox);
            (bbox[2] > bbox[0] && bbox[3] > bbox[1]).then_some(Detection { bbox, ..d })
        })
        .collect()
}
