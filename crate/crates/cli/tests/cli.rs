use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn saliency(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saliency"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Ten small synthetic scenes with masks.
fn dataset() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = saliency(&["make-dataset", "--output", path(dir.path()), "--count", "10", "--width", "96", "--height", "72"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn detect(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let images = data.join("images");
    let gt = data.join("gt");
    let mut args = vec!["detect", "--input", path(&images), "--gt", path(&gt), "--output", path(out)];
    args.extend_from_slice(extra);
    saliency(&args)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn metrics_have_one_row_per_image_and_a_mean() {
    let data = dataset();
    let out = TempDir::new().unwrap();
    let run = detect(data.path(), out.path(), &[]);
    assert_eq!(run.status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0], "image,wf,or,auc,mae");
    assert!(lines[1].starts_with("scene_001,"));
    assert!(lines[11].starts_with("mean,"));
    for name in ["pr.csv", "roc.csv", "run.log", "scene_001_coarse.png", "scene_001_refined.png"] {
        assert!(out.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn coarse_stage_writes_only_coarse_maps() {
    let data = dataset();
    let out = TempDir::new().unwrap();
    assert!(detect(data.path(), out.path(), &["--stage", "coarse"]).status.success());
    let pngs: Vec<String> = listing(out.path()).into_iter().filter(|n| n.ends_with(".png")).collect();
    assert_eq!(pngs.len(), 10);
    assert!(pngs.iter().all(|n| n.ends_with("_coarse.png")));
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let data = dataset();
    let outs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    assert!(detect(data.path(), outs[0].path(), &["--workers", "1"]).status.success());
    assert!(detect(data.path(), outs[1].path(), &["--workers", "1"]).status.success());
    assert!(detect(data.path(), outs[2].path(), &["--workers", "4"]).status.success());
    for name in ["metrics.csv", "pr.csv", "roc.csv", "scene_004_refined.png"] {
        let first = fs::read(outs[0].path().join(name)).unwrap();
        assert_eq!(first, fs::read(outs[1].path().join(name)).unwrap(), "{name}");
        assert_eq!(first, fs::read(outs[2].path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn corrupt_image_is_logged_and_skipped() {
    let data = dataset();
    let victim = data.path().join("images/scene_003.png");
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, &bytes[..bytes.len() / 3]).unwrap();
    let out = TempDir::new().unwrap();
    let run = detect(data.path(), out.path(), &[]);
    assert_eq!(run.status.code(), Some(0));
    let log = fs::read_to_string(out.path().join("run.log")).unwrap();
    assert!(log.lines().any(|l| l.starts_with("error scene_003.png")), "{log}");
    let csv = fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(!csv.contains("scene_003"));
}

#[test]
fn trace_flag_writes_solver_trace() {
    let data = dataset();
    let out = TempDir::new().unwrap();
    assert!(detect(data.path(), out.path(), &["--trace", "--stage", "coarse"]).status.success());
    let trace = fs::read_to_string(out.path().join("scene_001_trace.csv")).unwrap();
    assert!(trace.lines().count() > 2);
}

#[test]
fn config_file_is_applied_and_validated() {
    let data = dataset();
    let cfg_dir = TempDir::new().unwrap();
    let good = cfg_dir.path().join("good.cfg");
    fs::write(&good, "# coarse only\nstage = coarse\nalpha = 0.3\n").unwrap();
    let out = TempDir::new().unwrap();
    assert!(detect(data.path(), out.path(), &["--config", path(&good)]).status.success());
    assert!(!out.path().join("scene_001_refined.png").exists());

    let bad = cfg_dir.path().join("bad.cfg");
    fs::write(&bad, "alpha = 0.3\nbogus = 1\n").unwrap();
    let run = detect(data.path(), out.path(), &["--config", path(&bad)]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn exit_codes_distinguish_setup_and_total_failure() {
    let missing = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    let run = saliency(&["detect", "--input", path(&missing.path().join("nope")), "--output", path(out.path())]);
    assert_eq!(run.status.code(), Some(1));

    let broken = TempDir::new().unwrap();
    fs::write(broken.path().join("a.png"), b"not a png").unwrap();
    fs::write(broken.path().join("b.jpg"), b"nor a jpeg").unwrap();
    let run = saliency(&["detect", "--input", path(broken.path()), "--output", path(out.path())]);
    assert_eq!(run.status.code(), Some(2));
}
