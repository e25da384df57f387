//! `denom` subcommands. Exit codes: 0 success, 2 usage error (bad flags,
//! unreadable or invalid config), 1 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use denom_core::config::Config;
use denom_core::datakit::{prep_dataset, ClassTable, PrepOptions, SplitSpec};
use denom_core::features::FeatureSet;
use denom_core::imgproc::Image;
use denom_core::metrics::{assemble, evaluate, load_ground_truth_dir, parse_predictions_jsonl};
use denom_core::pipeline::Detector;
use serde_json::json;

use crate::bench::{run_bench, DEFAULT_FRAME_SIZE};
use crate::server::{serve, AppState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "denom", version, about = "Currency detection server and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the WebSocket server.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Detect on one image and write the boxes as JSON.
    Detect {
        #[arg(long)]
        image: PathBuf,
        /// Precomputed P3/P4/P5 features used instead of the configured source.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score prediction lines against YOLO labels.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-class PR curve CSVs; defaults to `<out stem>_pr` next to the report.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Letterbox, optionally augment, and split a labeled image folder.
    Prep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        augment: bool,
        #[arg(long, value_parser = parse_split, default_value = "0.7,0.15,0.15")]
        split: (f64, f64, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 640)]
        size: usize,
    },
    /// Time the pipeline on synthetic frames.
    Bench {
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_split(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => SplitSpec::new(a, b, c, 0).map(|_| (a, b, c)).map_err(|e| e.to_string()),
        _ => Err(format!("expected three comma-separated fractions, got {}", parts.len())),
    }
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<denom_core::Error> for Failure {
    fn from(e: denom_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(|e| Failure::Usage(e.to_string())),
        None => Ok(Config::default()),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("denom: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("denom: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Serve { config, port, bind } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = port {
                cfg.server.port = p;
            }
            if let Some(b) = bind {
                cfg.server.bind = b;
            }
            let state = AppState::from_config(cfg.clone()).context("building the detector")?;
            let rt = tokio::runtime::Runtime::new().context("starting the runtime")?;
            rt.block_on(async {
                let addr = format!("{}:{}", cfg.server.bind, cfg.server.port);
                let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                serve(listener, state).await.context("server stopped")
            })?;
            Ok(())
        }
        Command::Detect { image, features, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let detector = Detector::from_config(&cfg).context("building the detector")?;
            let img = Image::open(&image).with_context(|| format!("reading {}", image.display()))?;
            let result = match features {
                Some(f) => {
                    let fs = FeatureSet::load(&f).with_context(|| format!("reading {}", f.display()))?;
                    detector.detect_with_features(&img, &fs)?
                }
                None => detector.detect(&img)?,
            };
            let report = json!({
                "image": image.display().to_string(),
                "width": img.width(),
                "height": img.height(),
                "detections": result.detections.iter().map(|d| json!({
                    "cls": ClassTable.name(d.class_id),
                    "class_id": d.class_id,
                    "conf": d.confidence,
                    "xyxy": d.bbox,
                })).collect::<Vec<_>>(),
                "timing_ms": result.timing_ms,
            });
            write_json(out.as_deref(), &report)?;
            Ok(())
        }
        Command::Eval { preds, gt, out, curves } => {
            let text = std::fs::read_to_string(&preds).with_context(|| format!("reading {}", preds.display()))?;
            let records = parse_predictions_jsonl(&text).with_context(|| format!("parsing {}", preds.display()))?;
            let gt_set = load_ground_truth_dir(&gt).with_context(|| format!("loading {}", gt.display()))?;
            let images = assemble(&records, &gt_set)?;
            let names: Vec<&str> = ClassTable.entries().map(|e| e.name).collect();
            let report = evaluate(&images, &names);
            write_json(Some(&out), &report.to_json())?;
            let curves = curves.unwrap_or_else(|| {
                let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
                out.with_file_name(format!("{stem}_pr"))
            });
            std::fs::create_dir_all(&curves).with_context(|| format!("creating {}", curves.display()))?;
            for (c, curve) in report.curves.iter().enumerate() {
                if let Some(curve) = curve {
                    let path = curves.join(format!("{}.csv", names[c]));
                    std::fs::write(&path, curve.to_csv()).with_context(|| format!("writing {}", path.display()))?;
                }
            }
            print!("{}", report.curve_summary());
            println!(
                "precision {:.4} recall {:.4} f1 {:.5} accuracy {:.4} mAP50 {:.4} mAP50-95 {:.4}",
                report.precision, report.recall, report.f1, report.accuracy, report.map50, report.map50_95
            );
            Ok(())
        }
        Command::Prep { input, out, augment, split, seed, size } => {
            let (train, val, test) = split;
            let split = SplitSpec::new(train, val, test, seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let report = prep_dataset(&input, &out, &PrepOptions { augment, split, target: size })
                .with_context(|| format!("preparing {}", input.display()))?;
            println!(
                "{} sources -> {} images (train {}, val {}, test {}), {} boxes dropped",
                report.sources, report.outputs, report.per_split[0], report.per_split[1], report.per_split[2], report.dropped_boxes
            );
            Ok(())
        }
        Command::Bench { frames, config, seed } => {
            let cfg = load_config(config.as_deref())?;
            let detector = Detector::from_config(&cfg).context("building the detector")?;
            println!("{}", run_bench(&detector, frames, DEFAULT_FRAME_SIZE, seed)?);
            Ok(())
        }
    }
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
