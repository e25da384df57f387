use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use denom_core::datakit::{write_yolo_txt, Annotation};
use denom_core::features::mock_extract;
use denom_core::imgproc::Image;
use serde_json::Value;

fn denom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_denom")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(denom(&[]).status.code(), Some(2));
    assert_eq!(denom(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(denom(&["bench", "--frames", "many"]).status.code(), Some(2));
    assert_eq!(denom(&["prep", "--in", "a", "--out", "b", "--split", "0.7,0.2"]).status.code(), Some(2));
    assert_eq!(denom(&["prep", "--in", "a", "--out", "b", "--split", "0.7,0.2,0.2"]).status.code(), Some(2));
    let help = denom(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for cmd in ["serve", "detect", "eval", "prep", "bench"] {
        assert!(String::from_utf8_lossy(&help.stdout).contains(cmd));
    }
}

#[test]
fn serve_with_a_bad_config_exits_two_without_listening() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let start = Instant::now();
    let out = denom(&["serve", "--config", s(&dir.path().join("nope.json")), "--port", &port.to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(start.elapsed() < Duration::from_secs(20));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    assert!(std::net::TcpStream::connect(("127.0.0.1", port)).is_err());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"server": {"prot": 1}}"#).unwrap();
    assert_eq!(denom(&["serve", "--config", s(&bad)]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = denom(&["detect", "--image", s(&dir.path().join("missing.png"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = denom(&["eval", "--preds", s(&dir.path().join("p.jsonl")), "--gt", s(dir.path()), "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_on_the_toy_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = denom(&["eval", "--preds", s(&fixture("toy_eval/preds.jsonl")), "--gt", s(&fixture("toy_eval/gt")), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!((r["f1"].as_f64().unwrap() - 0.9585).abs() < 1e-4);
    assert_eq!(format!("{:.4}", r["precision"].as_f64().unwrap()), "0.9647");
    assert_eq!(format!("{:.4}", r["recall"].as_f64().unwrap()), "0.9523");
    for key in ["accuracy", "map50", "map50_95", "per_class", "confusion_matrix"] {
        assert!(!r[key].is_null(), "{key}");
    }
    assert_eq!(r["per_class"].as_array().unwrap().len(), 30);
    let curves: Vec<_> = std::fs::read_dir(dir.path().join("report_pr")).unwrap().collect();
    assert_eq!(curves.len(), 30);
    assert!(std::fs::read_to_string(dir.path().join("report_pr/5taka.csv")).unwrap().starts_with("recall,precision\n"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("f1 0.95845"));
}

#[test]
fn prep_with_augment_writes_twelve_per_source() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(src.path().join("labels")).unwrap();
    for i in 0..10 {
        Image::from_fn(60 + i, 40, 3, |x, y, c| (x * 2 + y + c * 30 + i) as u8).save(src.path().join(format!("n{i}.jpg"))).unwrap();
        let a = Annotation { class_id: i, cx: 0.5, cy: 0.5, w: 0.5, h: 0.4 };
        write_yolo_txt(&[a], src.path().join(format!("labels/n{i}.txt"))).unwrap();
    }
    let dst = out.path().join("prepared");
    let o = denom(&["prep", "--in", s(src.path()), "--out", s(&dst), "--augment", "--seed", "3", "--size", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("10 sources -> 120 images"));
    let count: usize = ["train", "val", "test"].iter().map(|sp| std::fs::read_dir(dst.join("images").join(sp)).unwrap().count()).sum();
    assert_eq!(count, 120);
    // a second augmentation pass over augmented output is refused
    let again = denom(&["prep", "--in", s(&dst), "--out", s(&out.path().join("twice")), "--augment"]);
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn detect_writes_json_and_accepts_feature_files() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("black.png");
    let black = Image::filled(640, 640, 3, 0);
    black.save(&img_path).unwrap();
    let run = |extra: &[&str], out: &Path| {
        let mut args = vec!["detect", "--image", s(&img_path), "--out", s(out)];
        args.extend_from_slice(extra);
        let o = denom(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_str::<Value>(&std::fs::read_to_string(out).unwrap()).unwrap()
    };
    let a = run(&[], &dir.path().join("a.json"));
    let b = run(&[], &dir.path().join("b.json"));
    assert_eq!(a["detections"], b["detections"]);
    assert_eq!((a["width"].as_u64(), a["height"].as_u64()), (Some(640), Some(640)));
    for key in ["pre", "inf", "post", "total"] {
        assert!(a["timing_ms"][key].is_number());
    }
    let feats = dir.path().join("black.dnm");
    mock_extract(&black, 0).unwrap().save(&feats).unwrap();
    let f = run(&["--features", s(&feats)], &dir.path().join("f.json"));
    assert!(f["detections"].is_array());
}

#[test]
fn bench_prints_the_stage_breakdown() {
    let o = denom(&["bench", "--frames", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for stage in ["pre ", "inf ", "post ", "total "] {
        assert!(text.lines().any(|l| l.starts_with(stage)), "{text}");
    }
    assert!(text.contains("ms preprocess,") && text.contains("ms inference,") && text.contains("ms postprocess per image at shape (1, 3, 640, 640)"));
}

#[test]
fn example_config_spells_out_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config.example.json");
    assert_eq!(denom_core::config::Config::load(&path).unwrap(), denom_core::config::Config::default());
}
