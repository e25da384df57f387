use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_SCALES: usize = 3;
pub const NUM_ANCHORS: usize = 3;
pub const NUM_CLASSES: usize = 30;
pub const STRIDES: [usize; NUM_SCALES] = [8, 16, 32];
pub const SCALE_NAMES: [&str; NUM_SCALES] = ["P3", "P4", "P5"];

/// Per-scale anchor shapes `(w, h)` in input pixels.
pub type AnchorSet = [[[f64; 2]; NUM_ANCHORS]; NUM_SCALES];

pub const DEFAULT_ANCHORS: AnchorSet = [
    [[10.0, 13.0], [16.0, 30.0], [33.0, 23.0]],
    [[30.0, 61.0], [62.0, 45.0], [59.0, 119.0]],
    [[116.0, 90.0], [156.0, 198.0], [373.0, 326.0]],
];

/// Shape of the detection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    /// Feature channels arriving at P3, P4, P5.
    pub in_channels: [usize; NUM_SCALES],
    /// Width every scale is reduced to before the SE block.
    pub hidden: usize,
    pub reduction: usize,
    pub num_classes: usize,
    /// Side of the square network input in pixels.
    pub input_size: usize,
    pub anchors: AnchorSet,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig::with_p5(256)
    }
}

impl HeadConfig {
    pub fn with_p5(p5_channels: usize) -> Self {
        HeadConfig {
            in_channels: [64, 128, p5_channels],
            hidden: 32,
            reduction: 16,
            num_classes: NUM_CLASSES,
            input_size: 640,
            anchors: DEFAULT_ANCHORS,
        }
    }

    /// `num_classes + 5`: box (4), objectness (1), class scores.
    pub fn outputs_per_anchor(&self) -> usize {
        self.num_classes + 5
    }

    pub fn out_channels(&self) -> usize {
        NUM_ANCHORS * self.outputs_per_anchor()
    }

    pub fn se_hidden(&self) -> usize {
        (self.hidden / self.reduction).max(1)
    }

    pub fn grid(&self, scale: usize) -> usize {
        self.input_size / STRIDES[scale]
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels.iter().any(|&c| c == 0) || self.hidden == 0 || self.reduction == 0 {
            return Err(Error::Config("head: channel widths and reduction must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("head: num_classes must be positive".into()));
        }
        if self.input_size == 0 || self.input_size % STRIDES[NUM_SCALES - 1] != 0 {
            return Err(Error::Config(format!(
                "head: input_size {} must be a positive multiple of 32",
                self.input_size
            )));
        }
        for scale in &self.anchors {
            for a in scale {
                if !(a[0] > 0.0 && a[1] > 0.0 && a[0].is_finite() && a[1].is_finite()) {
                    return Err(Error::Config(format!("head: anchor {a:?} must be positive")));
                }
            }
        }
        Ok(())
    }
}
