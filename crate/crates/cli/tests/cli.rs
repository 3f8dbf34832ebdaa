use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfc_core::synth::two_region;
use sfc_core::{load_image, save_image, Image};

fn sfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfc"))
        .args(args)
        .output()
        .expect("sfc runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synthetic(dir: &Path, size: usize) -> PathBuf {
    let (img, _) = two_region(size, 0.2, 0.8, 0.02, 1).unwrap();
    let path = dir.join("input.pgm");
    save_image(&img, &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&sfc(&["--help"])), 0);
    assert_eq!(code(&sfc(&["--version"])), 0);
    assert_eq!(code(&sfc(&["fast-ncut", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), 16);
    let out_dir = dir.path().join("out");
    assert_eq!(
        code(&sfc(&[
            "fast-ncut",
            "--out-dir",
            s(&out_dir),
            "--segments",
            "2"
        ])),
        1
    );
    let out = sfc(&[
        "fast-ncut",
        "--input",
        s(&input),
        "--out-dir",
        s(&out_dir),
        "--segments",
        "1",
    ]);
    assert_eq!(code(&out), 1);
    assert!(!out_dir.join("labels.png").exists());
    assert_eq!(
        code(&sfc(&[
            "ncut",
            "--input",
            s(&input),
            "--out-dir",
            s(&out_dir),
            "--segments",
            "2",
            "--radius",
            "0"
        ])),
        1
    );
    assert_eq!(code(&sfc(&["frobnicate"])), 1);
}

#[test]
fn io_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.pgm");
    let out = sfc(&[
        "fast-ncut",
        "--input",
        s(&missing),
        "--out-dir",
        s(dir.path()),
        "--segments",
        "2",
    ]);
    assert_eq!(code(&out), 2);
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5\n4 x\n255\n").unwrap();
    assert_eq!(
        code(&sfc(&[
            "fast-ncut",
            "--input",
            s(&bad),
            "--out-dir",
            s(dir.path()),
            "--segments",
            "2"
        ])),
        2
    );
}

#[test]
fn constant_image_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.pgm");
    save_image(&Image::constant(16, 16, 0.5).unwrap(), &input).unwrap();
    let out = sfc(&[
        "fast-ncut",
        "--input",
        s(&input),
        "--out-dir",
        s(&dir.path().join("o")),
        "--segments",
        "2",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn fast_ncut_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), 32);
    let out_dir = dir.path().join("out");
    let metrics = dir.path().join("m.json");
    let out = sfc(&[
        "fast-ncut",
        "--input",
        s(&input),
        "--out-dir",
        s(&out_dir),
        "--segments",
        "2",
        "--metrics-json",
        s(&metrics),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let labels = load_image(out_dir.join("labels.png")).unwrap();
    assert_eq!((labels.width(), labels.height()), (32, 32));
    for name in ["mask_0.pgm", "mask_1.pgm", "overlay.png"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let m = json(&metrics);
    assert_eq!(m["command"], "fast-ncut");
    assert_eq!(m["config"]["sigma_spatial"], 1.0);
    assert_eq!(m["segment_sizes"].as_array().unwrap().len(), 2);
    assert!(m["stage_ms"]["total"].as_f64().unwrap() > 0.0);
    assert!(m["lambda"][1].as_f64().unwrap().abs() < 1e-2);
}

#[test]
fn ncut_and_cond_ncut_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), 24);
    for (cmd, extra) in [
        ("ncut", vec!["--radius", "inf"]),
        ("cond-ncut", vec!["--search-radius", "4"]),
    ] {
        let out_dir = dir.path().join(cmd);
        let mut args = vec![
            cmd,
            "--input",
            s(&input),
            "--out-dir",
            s(&out_dir),
            "--segments",
            "2",
        ];
        args.extend(extra);
        let out = sfc(&args);
        assert_eq!(
            code(&out),
            0,
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out_dir.join("labels.png").exists());
    }
}

#[test]
fn compare_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), 24);
    let metrics = dir.path().join("c.json");
    let out = sfc(&[
        "compare",
        "--input",
        s(&input),
        "--sigma-spatial",
        "1.5",
        "--metrics-json",
        s(&metrics),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&metrics);
    assert!(m["label_agreement"].as_f64().unwrap() >= 0.99);
    assert!(m["filter_rel_error"].as_f64().unwrap() <= 0.05);
    assert!(m["lambda_deltas"][1].as_f64().unwrap() <= 1e-2);
    assert!(m["speedup"].as_f64().unwrap() > 0.0);
}

#[test]
fn compare_rejects_large_images() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), 70);
    assert_eq!(code(&sfc(&["compare", "--input", s(&input)])), 1);
}

#[test]
fn filter_preserves_constant_image() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.pgm");
    save_image(&Image::constant(20, 12, 0.4).unwrap(), &input).unwrap();
    let expected = load_image(&input).unwrap();
    for method in ["bilateral", "bilateral-brute", "nlm"] {
        let output = dir.path().join(format!("{method}.pgm"));
        let out = sfc(&[
            "filter",
            "--input",
            s(&input),
            "--output",
            s(&output),
            "--method",
            method,
            "--iterations",
            "3",
        ]);
        assert_eq!(
            code(&out),
            0,
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(
            load_image(&output).unwrap().data(),
            expected.data(),
            "{method}"
        );
    }
}

#[test]
fn filter_smooths_noise_but_keeps_the_edge() {
    let dir = tempfile::tempdir().unwrap();
    let (img, truth) = two_region(32, 0.2, 0.8, 0.05, 2).unwrap();
    let input = dir.path().join("noisy.pgm");
    save_image(&img, &input).unwrap();
    let output = dir.path().join("smooth.pgm");
    let out = sfc(&[
        "filter",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--method",
        "bilateral",
        "--sigma-spatial",
        "2",
    ]);
    assert_eq!(code(&out), 0);
    let smooth = load_image(&output).unwrap();
    let spread = |im: &Image, label: usize| {
        let vals: Vec<f64> = im
            .data()
            .iter()
            .zip(truth.labels())
            .filter(|(_, &l)| l == label)
            .map(|(v, _)| *v)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (
            mean,
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64,
        )
    };
    for label in 0..2 {
        let (m0, v0) = spread(&img, label);
        let (m1, v1) = spread(&smooth, label);
        assert!(v1 < v0);
        assert!((m1 - m0).abs() < 0.02);
    }
}

#[test]
fn deterministic_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), 32);
    let out_dir = dir.path().join("out");
    let metrics = out_dir.join("m.json");
    let run = || {
        let out = sfc(&[
            "fast-ncut",
            "--input",
            s(&input),
            "--out-dir",
            s(&out_dir),
            "--segments",
            "3",
            "--deterministic",
            "--metrics-json",
            s(&metrics),
        ]);
        assert_eq!(code(&out), 0);
        (
            std::fs::read(out_dir.join("labels.png")).unwrap(),
            std::fs::read(&metrics).unwrap(),
        )
    };
    let first = run();
    assert_eq!(first, run());
    assert!(json(&metrics)["stage_ms"]["total"].is_null());
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = sfc(&[
        "bench",
        "--sizes",
        "24,32",
        "--repeats",
        "1",
        "--radius",
        "3",
        "--csv",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("size,pipeline,wall_ms,filter_apps,lambda2")
    );
    assert_eq!(lines.count(), 4);
}
