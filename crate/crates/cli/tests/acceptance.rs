//! Final gate for the command-line pipeline: the full synth → clean →
//! planes → segment chain succeeds and is byte-for-byte reproducible.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use tempfile::tempdir;

fn pass(n: u32, name: &str) {
    println!("ACCEPTANCE {n} {name}: PASS");
}

fn roomscan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_roomscan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = roomscan(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "command {:?} failed, stderr: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs the whole pipeline with fixed seeds into `dir` and returns the
/// paths of every file it produced, in a stable order.
fn run_pipeline(dir: &Path) -> Vec<PathBuf> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_owned();

    let scene = p("scene.ply");
    let truth = p("truth.json");
    run_ok(&[
        "synth",
        "--output", &scene,
        "--truth", &truth,
        "--seed", "13",
        "--points-per-face", "150",
        "--outliers", "0.04",
        "--clutter", "1.0,1.5,0.4,0.8,0.6,0.8,150",
    ]);

    let cleaned = p("cleaned.ply");
    let clean_report = p("clean.json");
    run_ok(&[
        "clean",
        "--input", &scene,
        "--output", &cleaned,
        "--report", &clean_report,
    ]);

    let segments = p("segments.ply");
    let planes_report = p("planes.json");
    run_ok(&[
        "planes",
        "--input", &cleaned,
        "--output", &segments,
        "--report", &planes_report,
        "--min-inliers", "80",
    ]);

    let predicted = p("predicted.ply");
    let eval_report = p("eval.json");
    run_ok(&[
        "segment",
        "--input", &cleaned,
        "--output", &predicted,
        "--report", &eval_report,
        "--block-size", "10",
        "--points-per-block", "256",
        "--min-points", "20",
        "--folds", "5",
        "--kernel", "linear",
        "--seed", "17",
    ]);

    ["scene.ply", "truth.json", "cleaned.ply", "clean.json",
     "segments.ply", "planes.json", "predicted.ply", "eval.json"]
        .iter()
        .map(|name| dir.join(name))
        .collect()
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let start = Instant::now();
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();

    let files_a = run_pipeline(dir_a.path());
    let files_b = run_pipeline(dir_b.path());

    for (a, b) in files_a.iter().zip(&files_b) {
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        assert!(!bytes_a.is_empty(), "{} is empty", a.display());
        assert_eq!(
            bytes_a,
            bytes_b,
            "{} differs between identically seeded runs",
            a.file_name().unwrap().to_string_lossy()
        );
    }

    // Spot-check that the reports carry the expected structure.
    let planes: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&files_a[5]).unwrap()).unwrap();
    assert!(!planes["segments"].as_array().unwrap().is_empty());
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&files_a[7]).unwrap()).unwrap();
    assert!(eval["overall_accuracy"].as_f64().unwrap() > 0.0);

    assert!(
        start.elapsed().as_secs() < 120,
        "pipeline pair took {:?}",
        start.elapsed()
    );
    pass(10, "end_to_end_determinism");
}
