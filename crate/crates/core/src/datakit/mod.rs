//! Dataset preparation: the 30-class table, YOLO labels, rotation
//! augmentation and deterministic splitting.

mod classes;
mod prep;
mod rotate;
mod split;
mod yolo;

pub use classes::{class_lookup, ClassEntry, ClassTable, CurrencyGroup, NUM_CLASSES};
pub use prep::{prep_dataset, PrepOptions, PrepReport, SPLITS};
pub use rotate::{
    augment_twelve, rotate_annotation, rotate_image_and_boxes, Augmented, BASE_ANGLES, MIN_KEPT_AREA, TURN_ANGLES,
};
pub use split::{split_dataset, SplitSpec};
pub use yolo::{format_yolo, parse_yolo, read_yolo_txt, write_yolo_txt, Annotation};
