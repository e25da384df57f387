//! SE-augmented anchor detection head.
//!
//! Each of the three scales runs conv3x3 -> BN -> ReLU -> SE -> conv1x1 and
//! emits `3 * (classes + 5)` channels per cell, laid out per anchor as
//! `[tx, ty, tw, th, obj, cls...]`. Decoding uses the sigmoid-offset /
//! anchor-exponential parameterization:
//!
//! - center = `(cell + sigmoid(t_xy)) * stride`
//! - size = `anchor * exp(min(t_wh, 4))`
//! - confidence = `sigmoid(t_obj) * max sigmoid(t_cls)`

mod config;
mod decode;
mod loss;
mod model;
mod se;
mod stage;
mod train;

pub use config::{
    AnchorSet, HeadConfig, DEFAULT_ANCHORS, NUM_ANCHORS, NUM_CLASSES, NUM_SCALES, SCALE_NAMES, STRIDES,
};
pub use decode::{
    area, decode, decode_batch, decode_box, encode_box, iou, nms, rank_order, BoxXyxy, Detection,
    DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU, MAX_WH_LOGIT,
};
pub use loss::{
    assign_targets, head_loss, head_loss_with_grad, shape_iou, Assignment, GroundTruth, LossBreakdown, LossWeights,
    TrainTarget,
};
pub use model::{head_forward, DetectionHead};
pub use se::{se_forward, SeBlock, SeCache};
pub use stage::{HeadStage, StageCache};
pub use train::{stack_batch, train_head, train_step, TrainConfig, TrainHistory, TrainSample};
