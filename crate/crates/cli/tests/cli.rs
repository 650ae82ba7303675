use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kineme(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kineme"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A 24-video synthetic corpus plus a 4-kineme codebook learned from it.
fn corpus(dir: &Path) {
    ok(&kineme(dir, &["synth", "--videos", "24", "--duration", "12", "--seed", "5", "--out-dir", "data"]));
    ok(&kineme(dir, &["learn", "--manifest", "data/manifest.json", "--k", "4", "--seed", "1"]));
}

#[test]
fn synth_learn_encode_crossval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    assert!(dir.join("data/planted.json").exists());
    assert_eq!(fs::read_dir(dir.join("data/features")).unwrap().count(), 24);

    ok(&kineme(dir, &["encode", "--manifest", "data/manifest.json", "--codebook", "codebook.json"]));
    let csv = fs::read_to_string(dir.join("kineme_sequences.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("video_id,window,start_s,kineme"));
    // 12 s at 30 fps: 360 frames, 2 s windows every second
    assert_eq!(csv.lines().count(), 1 + 24 * 11);

    let args = [
        "crossval", "--manifest", "data/manifest.json", "--codebook", "codebook.json", "--model", "hmm", "--folds", "3",
        "--repeats", "2", "--seed", "9", "--out-dir", "cv",
    ];
    let out = kineme(dir, &args);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 runs"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("cv/crossval_O_hmm.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 6);
    let metrics = fs::read_to_string(dir.join("cv/crossval_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn crossval_is_reproducible_under_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    for out in ["a", "b"] {
        let args = [
            "crossval", "--manifest", "data/manifest.json", "--codebook", "codebook.json", "--model", "constant",
            "--task", "regression", "--folds", "4", "--repeats", "1", "--seed", "2", "--out-dir", out,
        ];
        ok(&kineme(dir, &args));
    }
    let a = fs::read(dir.join("a/crossval_O_constant.json")).unwrap();
    let b = fs::read(dir.join("b/crossval_O_constant.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_eval_and_fuse_on_tagged_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    let mut manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("data/manifest.json")).unwrap()).unwrap();
    for (i, e) in manifest["entries"].as_array_mut().unwrap().iter_mut().enumerate() {
        e["split"] = match i {
            0..16 => "train",
            16..20 => "val",
            _ => "test",
        }
        .into();
    }
    fs::write(dir.join("data/split.json"), manifest.to_string()).unwrap();

    let common = ["--manifest", "data/split.json", "--codebook", "codebook.json"];
    for (inputs, name) in [("kin", "kin"), ("au", "au")] {
        let model = format!("{name}.json");
        let mut args = vec!["train", "--trait", "O", "--model", "lstm", "--inputs", inputs, "--chunk-s", "4"];
        args.extend(common);
        args.extend(["--output", &model]);
        ok(&kineme(dir, &args));
        let mut args = vec!["eval", "--model", &model, "--out-dir", name];
        args.extend(common);
        ok(&kineme(dir, &args));
    }
    let preds = fs::read_to_string(dir.join("kin/predictions.csv")).unwrap();
    // three 4 s chunks per 12 s video
    assert_eq!(preds.lines().count(), 1 + 24 * 3);

    ok(&kineme(dir, &["fuse", "--kin", "kin/predictions.csv", "--au", "au/predictions.csv", "--out-dir", "fused"]));
    let fusion: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("fused/fusion.json")).unwrap()).unwrap();
    let alpha = fusion["alpha"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&alpha) && ((alpha * 100.0).round() - alpha * 100.0).abs() < 1e-9);
    assert!(fusion["val_metric"].as_f64() >= fusion["val_metric_kin"].as_f64());
    assert!(fusion["val_metric"].as_f64() >= fusion["val_metric_au"].as_f64());
    assert!(dir.join("fused/metrics.csv").exists());
}

#[test]
fn plot_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    ok(&kineme(dir, &["plot", "--codebook", "codebook.json", "--out-dir", "plots"]));
    let csv = fs::read_to_string(dir.join("plots/kinemes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 60);
    let svg = fs::read_to_string(dir.join("plots/kinemes.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 12);
}

#[test]
fn missing_column_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::create_dir(dir.join("f")).unwrap();
    fs::write(dir.join("f/a.csv"), "frame,timestamp,pose_Rx,pose_Rz\n1,0.0,0.1,0.2\n").unwrap();
    fs::write(
        dir.join("manifest.json"),
        r#"{"version": 1, "traits": ["O"], "entries": [{"video_id": "a", "features": "f/a.csv", "scores": {"O": 0.5}}]}"#,
    )
    .unwrap();
    let out = kineme(dir, &["learn", "--manifest", "manifest.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pose_Ry"));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(kineme(dir, &["learn"]).status.code(), Some(1));
    assert_eq!(kineme(dir, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(kineme(dir, &["crossval", "--manifest", "m.json", "--model", "svm"]).status.code(), Some(1));
    assert_eq!(kineme(dir, &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_manifest_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(kineme(tmp.path(), &["encode", "--manifest", "nope.json", "--codebook", "cb.json"]).status.code(), Some(2));
}
