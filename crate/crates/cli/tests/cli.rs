//! End-to-end tests of the `arteria` binary: exit codes, diagnostics,
//! output layout, manifest hashes, and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn arteria(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arteria"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small single-vessel phantom spec, fast enough for CLI round trips.
const SMALL_SPEC: &str = r#"{
  "width": 64, "height": 64, "depth": 12,
  "spacing_mm": [1.0, 1.0, 5.0],
  "background_intensity": 100,
  "lumen_intensity": 1200,
  "noise_sigma": 0.0,
  "rng_seed": 7,
  "segments": [{
    "id": 0, "slice_start": 0, "slice_end": 11,
    "center_start": [32.0, 32.0], "center_end": [40.0, 32.0],
    "radius_start": 10.0, "radius_end": 10.0
  }],
  "lesions": []
}"#;

#[test]
fn phantom_preset_writes_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phantom");
    let result = arteria(&["phantom", "--preset", "stenosis-20", "--out", path_str(&out)]);
    assert!(result.status.success(), "{result:?}");
    for name in ["volume.json", "volume.raw", "gt_labels.raw", "gt_counts.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn phantom_unknown_preset_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let result = arteria(&["phantom", "--preset", "nope", "--out", path_str(dir.path())]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("unknown preset"), "{stderr}");
}

#[test]
fn phantom_spec_with_missing_segment_cites_id() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    let broken = SMALL_SPEC.replace(
        "\"lesions\": []",
        r#""lesions": [{"segment_id": 42, "slice_start": 0, "slice_end": 1,
            "theta_start_deg": 0.0, "theta_end_deg": 90.0,
            "radial_start": 0.0, "radial_end": 1.0, "intensity": 2500}]"#,
    );
    std::fs::write(&spec_path, broken).unwrap();
    let result = arteria(&[
        "phantom",
        "--input",
        path_str(&spec_path),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("42"), "{stderr}");
    assert_eq!(stderr.lines().count(), 1, "single-line diagnostic: {stderr}");
}

#[test]
fn track_pipeline_end_to_end_on_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, SMALL_SPEC).unwrap();
    let phantom_dir = dir.path().join("phantom");
    let run_dir = dir.path().join("run");

    let result = arteria(&[
        "phantom",
        "--input",
        path_str(&spec_path),
        "--out",
        path_str(&phantom_dir),
    ]);
    assert!(result.status.success(), "{result:?}");

    let result = arteria(&[
        "track",
        "--input",
        path_str(&phantom_dir.join("volume.json")),
        "--out",
        path_str(&run_dir),
    ]);
    assert!(result.status.success(), "{result:?}");

    // Auto counts agree with ground truth for the clean cylinder.
    let eval = arteria(&[
        "eval",
        path_str(&run_dir.join("counts.csv")),
        path_str(&phantom_dir.join("gt_counts.csv")),
    ]);
    assert!(eval.status.success());
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(
        stdout.contains("\"exact_match_rate\":1.000000"),
        "{stdout}"
    );

    // Manifest hashes verify against the files on disk.
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("run_manifest.json")).unwrap(),
    )
    .unwrap();
    let outputs = manifest["outputs"].as_object().unwrap();
    assert_eq!(outputs.len(), 4 + 12);
    for (name, hash) in outputs {
        let bytes = std::fs::read(run_dir.join(name)).unwrap();
        assert_eq!(
            arteria::pipeline::sha256_hex(&bytes),
            hash.as_str().unwrap(),
            "{name} hash mismatch"
        );
    }
}

#[test]
fn track_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, SMALL_SPEC).unwrap();
    let phantom_dir = dir.path().join("phantom");
    assert!(arteria(&[
        "phantom",
        "--input",
        path_str(&spec_path),
        "--out",
        path_str(&phantom_dir)
    ])
    .status
    .success());

    let run = |threads: &str, out: &Path| {
        let result = arteria(&[
            "track",
            "--input",
            path_str(&phantom_dir.join("volume.json")),
            "--out",
            path_str(out),
            "--threads",
            threads,
        ]);
        assert!(result.status.success(), "{result:?}");
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run("1", &a);
    run("4", &b);
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "run_manifest.json" {
            // Config echo differs in the threads field by construction.
            continue;
        }
        let bytes_a = std::fs::read(a.join(&name)).unwrap();
        let bytes_b = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name:?} differs between runs");
    }
}

#[test]
fn track_rejects_inverted_window_naming_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "threshold_lo = 5000\nthreshold_hi = 100\n").unwrap();
    let result = arteria(&[
        "track",
        "--input",
        path_str(dir.path()),
        "--out",
        path_str(&dir.path().join("out")),
        "--config",
        path_str(&config),
    ]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(
        stderr.contains("threshold_lo") && stderr.contains("threshold_hi"),
        "{stderr}"
    );
    assert_eq!(stderr.lines().count(), 1, "single-line diagnostic: {stderr}");
}

#[test]
fn track_reports_seed_not_found() {
    let dir = tempfile::tempdir().unwrap();
    // An all-background PGM stack: nothing can seed.
    let mut pgm = b"P5\n32 32\n255\n".to_vec();
    pgm.extend_from_slice(&[0u8; 32 * 32]);
    std::fs::write(dir.path().join("slice_000.pgm"), &pgm).unwrap();
    let result = arteria(&[
        "track",
        "--input",
        path_str(dir.path()),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn eval_malformed_header_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&good, "slice,count\n0,1\n").unwrap();
    std::fs::write(&bad, "slices,counts\n0,1\n").unwrap();
    let result = arteria(&["eval", path_str(&good), path_str(&bad)]);
    assert!(!result.status.success());
}

#[test]
fn eval_hand_computed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let auto = dir.path().join("auto.csv");
    let reference = dir.path().join("ref.csv");
    std::fs::write(&auto, "slice,count\n0,1\n1,1\n2,2\n").unwrap();
    std::fs::write(&reference, "slice,count\n0,1\n1,2\n2,2\n").unwrap();
    let result = arteria(&["eval", path_str(&auto), path_str(&reference)]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert_eq!(
        stdout.trim(),
        "{\"n_slices\":3,\"exact_match_rate\":0.666667,\"mean_abs_error\":0.333333,\"per_slice_diff\":[0,-1,0]}"
    );
}

#[test]
fn plot_reemits_svgs_from_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    std::fs::write(
        &metrics,
        "slice,vessel_count,lumen_px,calc_px,stenosis,calc_intensity_sum\n\
         0,1,80,20,0.200000,33000\n\
         1,1,100,0,0.000000,0\n",
    )
    .unwrap();
    let out = dir.path().join("plots");
    let result = arteria(&["plot", "--input", path_str(&metrics), "--out", path_str(&out)]);
    assert!(result.status.success(), "{result:?}");
    assert!(out.join("stenosis.svg").exists());
    assert!(out.join("calc_intensity.svg").exists());
    let svg = std::fs::read_to_string(out.join("stenosis.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}
