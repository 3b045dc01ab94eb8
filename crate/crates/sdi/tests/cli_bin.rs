//! Smoke tests that drive the actual `sdi` binary end to end.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdi"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sdi-bin-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn verify_subcommand_passes_a_hundred_trials() {
    let output = bin()
        .args(["verify", "--seed", "0", "--trials", "100"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("100/100 pass"), "{stdout}");
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tmp_dir("pipeline");
    let out = dir.to_str().unwrap();

    let status = bin()
        .args([
            "gen",
            "--kind",
            "phase",
            "--height",
            "16",
            "--width",
            "16",
            "--bands",
            "3",
            "--channels",
            "1",
            "--kernel",
            "5",
            "--seed",
            "7",
            "--out",
            out,
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let scene = dir.join("scene.hsic");
    let psfs = dir.join("psfs.hsic");
    let filters = dir.join("filters.hsic");
    let status = bin()
        .args([
            "simulate",
            "--scene",
            scene.to_str().unwrap(),
            "--psfs",
            psfs.to_str().unwrap(),
            "--filters",
            filters.to_str().unwrap(),
            "--sigma",
            "0.0",
            "--out",
            out,
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{"stages": 2, "denoiser": {"kind": "identity"}}"#,
    )
    .unwrap();
    let status = bin()
        .args([
            "reconstruct",
            "--measurement",
            dir.join("measurement.hsic").to_str().unwrap(),
            "--psfs",
            psfs.to_str().unwrap(),
            "--filters",
            filters.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            out,
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("reconstruction.hsic").exists());
    assert!(dir.join("state.json").exists());

    let status = bin()
        .args([
            "hessian-report",
            "--system",
            "sdi",
            "--psfs",
            psfs.to_str().unwrap(),
            "--filters",
            filters.to_str().unwrap(),
            "--out",
            out,
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("hessian.json")).unwrap()).unwrap();
    assert!(report["conditionNumber"].is_number());
    assert!(report["offDiagRatioSpatial"].is_number());
    assert!(report["offDiagRatioFreq"].is_number());
    assert_eq!(report["dims"]["height"], 16);
}

#[test]
fn noise_sweep_degrades_with_noise() {
    let dir = tmp_dir("sweep");
    let out = dir.to_str().unwrap();
    let status = bin()
        .args([
            "gen",
            "--kind",
            "scatter",
            "--height",
            "16",
            "--width",
            "16",
            "--bands",
            "3",
            "--channels",
            "3",
            "--kernel",
            "7",
            "--seed",
            "5",
            "--out",
            out,
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{"stages": 3, "phi": [0.002, 0.002, 0.002], "chi": [50.0, 100.0, 200.0]}"#,
    )
    .unwrap();
    let status = bin()
        .args([
            "noise-sweep",
            "--scene",
            dir.join("scene.hsic").to_str().unwrap(),
            "--psfs",
            dir.join("psfs.hsic").to_str().unwrap(),
            "--filters",
            dir.join("filters.hsic").to_str().unwrap(),
            "--sigmas",
            "0,0.01",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            out,
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let csv = std::fs::read_to_string(dir.join("noise_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "scene,method,psnr,ssim,sam");
    let parse_psnr = |line: &str| -> f64 { line.split(',').nth(2).unwrap().parse().unwrap() };
    let clean = parse_psnr(lines.next().unwrap());
    let noisy = parse_psnr(lines.next().unwrap());
    assert!(noisy < clean, "noisy {noisy} should be below clean {clean}");
}

#[test]
fn missing_file_exits_nonzero_with_one_line_diagnostic() {
    let dir = tmp_dir("errors");
    let output = bin()
        .args([
            "simulate",
            "--scene",
            dir.join("nope.hsic").to_str().unwrap(),
            "--psfs",
            dir.join("nope.hsic").to_str().unwrap(),
            "--filters",
            dir.join("nope.hsic").to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("sdi: "));
}
