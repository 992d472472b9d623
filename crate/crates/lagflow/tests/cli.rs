//! End-to-end checks of the command-line binary: argument handling, exit
//! codes, and output determinism.

use std::path::Path;
use std::process::Command;

fn lagflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lagflow"))
}

fn write_config(dir: &Path, name: &str, out_dir: &Path, t_end: f64) -> std::path::PathBuf {
    let path = dir.join(name);
    let text = format!(
        r#"{{
            "n": 16,
            "sigma": 0.2,
            "t_end": {t_end},
            "c": 0,
            "initial": {{"shears": [
                {{"axis": "y", "amplitude": 0.1, "profile": {{"sin": [1.0]}}}}
            ]}},
            "out_dir": "{}",
            "diag_every": 10,
            "snapshot_every": 5,
            "residual_every": 0,
            "seed": 3
        }}"#,
        out_dir.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = lagflow().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn run_produces_outputs_and_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), "run.json", &out_dir, 0.02);
    let out = lagflow().arg("run").arg(&cfg).env("LAGFLOW_THREADS", "1").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("diagnostics.csv").exists());
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("snapshot_final.snap").exists());
}

#[test]
fn malformed_config_exits_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"n\": 16,\n  \"oops\": true\n}").unwrap();
    let out = lagflow().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn corrupted_snapshot_header_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), "run.json", &out_dir, 0.01);
    assert_eq!(lagflow().arg("run").arg(&cfg).output().unwrap().status.code(), Some(0));

    let snap = out_dir.join("snapshot_final.snap");
    let mut bytes = std::fs::read(&snap).unwrap();
    bytes[0] ^= 0xff;
    let corrupted = dir.path().join("corrupted.snap");
    std::fs::write(&corrupted, bytes).unwrap();

    let out2 = dir.path().join("out2");
    let cfg2 = write_config(dir.path(), "resume.json", &out2, 0.02);
    let out = lagflow().arg("resume").arg(&corrupted).arg(&cfg2).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn resume_continues_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), "run.json", &out_dir, 0.01);
    assert_eq!(lagflow().arg("run").arg(&cfg).output().unwrap().status.code(), Some(0));

    let out2 = dir.path().join("out2");
    let cfg2 = write_config(dir.path(), "resume.json", &out2, 0.02);
    let out = lagflow()
        .arg("resume")
        .arg(out_dir.join("snapshot_final.snap"))
        .arg(&cfg2)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out2.join("diagnostics.csv")).unwrap();
    let first_row = csv.lines().nth(1).unwrap();
    // The resumed run starts at the snapshot time, not zero.
    assert!(!first_row.starts_with("0.0000000000000000e0"), "{first_row}");
}

#[test]
fn verify_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("v1");
    let out2 = dir.path().join("v2");
    let cfg1 = write_config(dir.path(), "v1.json", &out1, 0.0);
    let cfg2 = write_config(dir.path(), "v2.json", &out2, 0.0);
    for cfg in [&cfg1, &cfg2] {
        let out = lagflow().arg("verify").arg(cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(out1.join("verify.json")).unwrap();
    let b = std::fs::read(out2.join("verify.json")).unwrap();
    assert_eq!(a, b, "same seed must give identical verify.json");
}
