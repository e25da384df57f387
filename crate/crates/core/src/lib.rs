//! Core runtime for real-time currency detection aimed at visually impaired
//! users.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`imgproc`]: blur, LAB-space CLAHE, sharpening, white letterboxing
//! - [`tensor`]: dense tensors and the layer set with hand-written backward passes
//! - [`features`]: the pluggable multi-scale feature provider
//! - [`head`]: SE-augmented anchor detection head, decoding, NMS, loss, training
//! - [`datakit`]: class table, YOLO labels, rotation augmentation, splitting
//! - [`metrics`]: matching, confusion matrix, precision/recall/F1, AP and mAP
//! - [`assist`]: announcement stabilizer, gesture classifier, counting ledger
//! - [`pipeline`]: the per-frame chain from image to detections
//! - [`config`]: the JSON service configuration

pub mod assist;
pub mod config;
pub mod container;
pub mod datakit;
pub mod error;
pub mod features;
pub mod head;
pub mod imgproc;
pub mod metrics;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
