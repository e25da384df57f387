//! Directory-level dataset preparation: letterbox, optional twelve-way
//! rotation, split by source image, YOLO layout out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::classes::ClassTable;
use super::rotate::augment_twelve;
use super::split::{split_dataset, SplitSpec};
use super::yolo::{read_yolo_txt, write_yolo_txt, Annotation};
use crate::error::{Error, Result};
use crate::imgproc::{letterbox_square, Image, DEFAULT_TARGET, WHITE};

pub const SPLITS: [&str; 3] = ["train", "val", "test"];
const MANIFEST: &str = "prep.json";
const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone, PartialEq)]
pub struct PrepOptions {
    pub augment: bool,
    pub split: SplitSpec,
    pub target: usize,
}

impl Default for PrepOptions {
    fn default() -> Self {
        PrepOptions { augment: false, split: SplitSpec::default(), target: DEFAULT_TARGET }
    }
}

/// Written to the output root; also how a second augmentation pass is refused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepReport {
    pub augmented: bool,
    pub sources: usize,
    pub outputs: usize,
    /// Output images per split, in `train, val, test` order.
    pub per_split: [usize; 3],
    pub dropped_boxes: usize,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn to_color(img: Image) -> Image {
    if img.channels() == 3 {
        return img;
    }
    Image::from_fn(img.width(), img.height(), 3, |x, y, _| img.get(x, y, 0))
}

struct Source {
    stem: String,
    image: Image,
    annotations: Vec<Annotation>,
}

fn load_source(path: &Path, labels_dir: &Path, target: usize) -> Result<Source> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
    let label_path = labels_dir.join(format!("{stem}.txt"));
    let annotations = if label_path.exists() { read_yolo_txt(&label_path)? } else { Vec::new() };
    let img = to_color(Image::open(path)?);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (image, t) = letterbox_square(&img, target, WHITE)?;
    let n = target as f64;
    let annotations = annotations
        .iter()
        .map(|a| Annotation::from_xyxy(a.class_id, t.forward_box(a.to_xyxy(w, h)), n, n))
        .collect();
    Ok(Source { stem, image, annotations })
}

/// Reads `<input>/images` (or `<input>` itself) with labels from
/// `<input>/labels`, writes `images/{train,val,test}`, `labels/...`,
/// `classes.txt` and a manifest under `output`.
pub fn prep_dataset(input: &Path, output: &Path, opts: &PrepOptions) -> Result<PrepReport> {
    opts.split.validate()?;
    if input.join(MANIFEST).exists() && opts.augment {
        let prior: PrepReport = serde_json::from_str(
            &std::fs::read_to_string(input.join(MANIFEST)).map_err(|e| Error::io(input.join(MANIFEST), e))?,
        )
        .map_err(|e| Error::format(MANIFEST, e.to_string()))?;
        if prior.augmented {
            return Err(Error::invalid(format!("{} is already augmented output; refusing a second pass", input.display())));
        }
    }
    let images_dir = if input.join("images").is_dir() { input.join("images") } else { input.to_path_buf() };
    let labels_dir = input.join("labels");
    let files = list_images(&images_dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no images found in {}", images_dir.display())));
    }
    for split in SPLITS {
        for kind in ["images", "labels"] {
            let d = output.join(kind).join(split);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let indices: Vec<usize> = (0..files.len()).collect();
    let (train, val, _) = split_dataset(&indices, &opts.split)?;
    let split_of = |i: usize| if train.contains(&i) { 0 } else if val.contains(&i) { 1 } else { 2 };

    let mut report = PrepReport { augmented: opts.augment, sources: files.len(), outputs: 0, per_split: [0; 3], dropped_boxes: 0 };
    for (i, path) in files.iter().enumerate() {
        let src = load_source(path, &labels_dir, opts.target)?;
        let outputs: Vec<(String, Image, Vec<Annotation>)> = if opts.augment {
            augment_twelve(&src.image, &src.annotations)?
                .into_iter()
                .map(|a| (format!("{}_r{:02}_t{:03}", src.stem, a.base, a.turn), a.image, a.annotations))
                .collect()
        } else {
            vec![(src.stem.clone(), src.image, src.annotations.clone())]
        };
        let split = SPLITS[split_of(i)];
        for (name, image, boxes) in outputs {
            report.dropped_boxes += src.annotations.len() - boxes.len();
            image.save(output.join("images").join(split).join(format!("{name}.png")))?;
            write_yolo_txt(&boxes, output.join("labels").join(split).join(format!("{name}.txt")))?;
            report.outputs += 1;
            report.per_split[split_of(i)] += 1;
        }
    }
    let classes = output.join("classes.txt");
    std::fs::write(&classes, ClassTable.to_classes_txt()).map_err(|e| Error::io(&classes, e))?;
    let manifest = output.join(MANIFEST);
    std::fs::write(&manifest, serde_json::to_string_pretty(&report).expect("plain struct"))
        .map_err(|e| Error::io(&manifest, e))?;
    Ok(report)
}
