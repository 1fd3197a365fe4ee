use std::fs;
use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
seed = 11

[motion]
period = 20.0

[calibration_motion]
stations = 200

[handeye]
set_size = 40
repetitions = 4
"#;

fn stickpose(args: &[&str], config: Option<&Path>, out: &Path) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stickpose"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let output = cmd.output().expect("spawn stickpose");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    (output.status.code().unwrap_or(-1), text)
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn full_pipeline_exits_zero_per_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    for stage in ["simulate", "calibrate", "fuse", "evaluate"] {
        let (code, text) = stickpose(&[stage], Some(&cfg), &out);
        assert_eq!(code, 0, "{stage}: {text}");
    }
    assert!(out.join("scene/truth.json").exists());
    assert!(out.join("calibration.json").exists());
    assert!(out.join("fused.txt").exists());
    assert!(out.join("reports").is_dir());

    let (code, text) = stickpose(&["report"], Some(&cfg), &out);
    assert!(code == 0 || code == 4, "report: {text}");
    assert!(out.join("summary.txt").exists());
    assert!(text.contains("overall:"));
}

#[test]
fn later_stages_reuse_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    assert_eq!(stickpose(&["simulate"], Some(&cfg), &out).0, 0);
    let (code, text) = stickpose(&["calibrate"], None, &out);
    assert_eq!(code, 0, "{text}");
}

#[test]
fn unknown_config_key_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[motion]\nperiod = 20.0\nbogus = 1\n");
    let (code, text) = stickpose(&["simulate"], Some(&cfg), &tmp.path().join("run"));
    assert_eq!(code, 2, "{text}");
}

#[test]
fn invalid_config_value_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[ukf]\nalpha = -1.0\n");
    let (code, text) = stickpose(&["simulate"], Some(&cfg), &tmp.path().join("run"));
    assert_eq!(code, 2, "{text}");
}

#[test]
fn missing_config_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let (code, text) = stickpose(&["simulate"], Some(&missing), &tmp.path().join("run"));
    assert_eq!(code, 2, "{text}");
}

#[test]
fn insufficient_motion_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}min_rotation_deg = 170.0\n");
    let cfg = write_config(tmp.path(), "stiff.toml", &body);
    let out = tmp.path().join("run");
    assert_eq!(stickpose(&["simulate"], Some(&cfg), &out).0, 0);
    let (code, text) = stickpose(&["calibrate"], Some(&cfg), &out);
    assert_eq!(code, 3, "{text}");
}

#[test]
fn unattainable_thresholds_exit_four() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[thresholds.fused_mm]\ntarget = 0.001\ntolerance = 0.01\n");
    let cfg = write_config(tmp.path(), "strict.toml", &body);
    let out = tmp.path().join("run");
    for stage in ["simulate", "calibrate", "fuse", "evaluate"] {
        assert_eq!(stickpose(&[stage], Some(&cfg), &out).0, 0, "{stage}");
    }
    let (code, text) = stickpose(&["report"], Some(&cfg), &out);
    assert_eq!(code, 4, "{text}");
    assert!(text.contains("FAIL fused error [mm]"), "{text}");
}

#[test]
fn seeds_fan_out_into_subdirectories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("mc");
    for stage in ["simulate", "calibrate", "fuse", "evaluate"] {
        let (code, text) = stickpose(&[stage, "--seeds", "2", "--seed", "5"], Some(&cfg), &out);
        assert_eq!(code, 0, "{stage}: {text}");
    }
    assert!(out.join("seed_5/fused.txt").exists());
    assert!(out.join("seed_6/fused.txt").exists());
    let (code, text) = stickpose(&["report", "--seeds", "2", "--seed", "5"], Some(&cfg), &out);
    assert!(code == 0 || code == 4, "{text}");
    assert!(text.contains("seeds: 5, 6"), "{text}");
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(stickpose(&["simulate"], Some(&cfg), &a).0, 0);
    assert_eq!(stickpose(&["simulate"], Some(&cfg), &b).0, 0);
    let truth_a = fs::read(a.join("scene/truth.json")).unwrap();
    let truth_b = fs::read(b.join("scene/truth.json")).unwrap();
    assert_eq!(truth_a, truth_b);
}
