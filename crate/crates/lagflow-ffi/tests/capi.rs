//! Exercises the C ABI end to end from Rust: handle lifecycle, stepping,
//! measurement, snapshot roundtrip, and the error paths.

use std::ffi::{CStr, CString};

use lagflow_ffi::*;

fn config_json(out_dir: &str, t_end: f64) -> CString {
    CString::new(format!(
        r#"{{
            "n": 16,
            "sigma": 0.2,
            "t_end": {t_end},
            "c": 0,
            "initial": {{"shears": [
                {{"axis": "y", "amplitude": 0.1, "profile": {{"sin": [1.0]}}}}
            ]}},
            "out_dir": "{out_dir}",
            "diag_every": 10
        }}"#
    ))
    .unwrap()
}

#[test]
fn version_is_a_cstring() {
    let v = unsafe { CStr::from_ptr(lagflow_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn sim_lifecycle_step_measure_free() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_json(dir.path().to_str().unwrap(), 1.0);
    let sim = unsafe { lagflow_sim_new(cfg.as_ptr()) };
    assert!(!sim.is_null());

    let t0 = unsafe { lagflow_sim_time(sim) };
    assert_eq!(t0, 0.0);

    let mut diag = LagflowDiagnostics::default();
    assert_eq!(unsafe { lagflow_sim_measure(sim, &mut diag) }, LagflowStatus::Ok);
    assert!(diag.min_eta > 0.9 && diag.min_eta <= 1.0);
    assert!(diag.i_h2 > 0.0);
    assert!(diag.m_h2_over_eta >= diag.i_h2);

    assert_eq!(unsafe { lagflow_sim_step(sim, 20) }, LagflowStatus::Ok);
    let t1 = unsafe { lagflow_sim_time(sim) };
    assert!(t1 > t0);

    let mut diag1 = LagflowDiagnostics::default();
    assert_eq!(unsafe { lagflow_sim_measure(sim, &mut diag1) }, LagflowStatus::Ok);
    assert!(diag1.i_h2 < diag.i_h2, "curvature must decay");

    unsafe { lagflow_sim_free(sim) };
}

#[test]
fn snapshot_roundtrip_through_c_api() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_json(dir.path().to_str().unwrap(), 1.0);
    let sim = unsafe { lagflow_sim_new(cfg.as_ptr()) };
    assert!(!sim.is_null());
    assert_eq!(unsafe { lagflow_sim_step(sim, 7) }, LagflowStatus::Ok);
    let t_saved = unsafe { lagflow_sim_time(sim) };

    let snap = dir.path().join("mid.snap");
    let snap_c = CString::new(snap.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { lagflow_sim_save_snapshot(sim, snap_c.as_ptr()) },
        LagflowStatus::Ok
    );

    let resumed = unsafe { lagflow_sim_from_snapshot(snap_c.as_ptr(), cfg.as_ptr()) };
    assert!(!resumed.is_null());
    assert_eq!(unsafe { lagflow_sim_time(resumed) }, t_saved);

    // Identical continuation from either handle.
    assert_eq!(unsafe { lagflow_sim_step(sim, 5) }, LagflowStatus::Ok);
    assert_eq!(unsafe { lagflow_sim_step(resumed, 5) }, LagflowStatus::Ok);
    let mut a = LagflowDiagnostics::default();
    let mut b = LagflowDiagnostics::default();
    assert_eq!(unsafe { lagflow_sim_measure(sim, &mut a) }, LagflowStatus::Ok);
    assert_eq!(unsafe { lagflow_sim_measure(resumed, &mut b) }, LagflowStatus::Ok);
    assert_eq!(a.t.to_bits(), b.t.to_bits());
    assert_eq!(a.i_h2.to_bits(), b.i_h2.to_bits());
    assert_eq!(a.min_eta.to_bits(), b.min_eta.to_bits());

    unsafe {
        lagflow_sim_free(sim);
        lagflow_sim_free(resumed);
    }
}

#[test]
fn error_paths_report_messages() {
    // Null config.
    let sim = unsafe { lagflow_sim_new(std::ptr::null()) };
    assert!(sim.is_null());
    let msg = unsafe { CStr::from_ptr(lagflow_last_error_message()) };
    assert!(msg.to_str().unwrap().contains("null"));

    // Malformed JSON.
    let bad = CString::new("{ not json").unwrap();
    let sim = unsafe { lagflow_sim_new(bad.as_ptr()) };
    assert!(sim.is_null());
    let msg = unsafe { CStr::from_ptr(lagflow_last_error_message()) };
    assert!(msg.to_str().unwrap().contains("line"));

    // Unknown key.
    let unknown = CString::new(
        r#"{"n": 16, "t_end": 0.0, "initial": {"shears": []}, "out_dir": "/tmp/x", "sigm": 0.1}"#,
    )
    .unwrap();
    let sim = unsafe { lagflow_sim_new(unknown.as_ptr()) };
    assert!(sim.is_null());

    // Flow with c != 0 is rejected.
    let c1 = CString::new(
        r#"{"n": 16, "t_end": 1.0, "c": 1, "initial": {"shears": []}, "out_dir": "/tmp/x"}"#,
    )
    .unwrap();
    let sim = unsafe { lagflow_sim_new(c1.as_ptr()) };
    assert!(sim.is_null());

    // Null handle operations are safe and report status.
    assert_eq!(
        unsafe { lagflow_sim_step(std::ptr::null_mut(), 1) },
        LagflowStatus::InvalidArgument
    );
    assert!(unsafe { lagflow_sim_time(std::ptr::null()) }.is_nan());
    unsafe { lagflow_sim_free(std::ptr::null_mut()) };
}

#[test]
fn run_and_verify_entry_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_json(dir.path().to_str().unwrap(), 0.0);
    assert_eq!(unsafe { lagflow_run(cfg.as_ptr()) }, LagflowStatus::Ok);
    assert!(dir.path().join("diagnostics.csv").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn generated_header_exists_and_declares_api() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("lagflow.h");
    let text = std::fs::read_to_string(header).expect("cbindgen header");
    for symbol in [
        "LAGFLOW_H",
        "LagflowStatus",
        "LagflowDiagnostics",
        "LagflowSim",
        "lagflow_sim_new",
        "lagflow_sim_step",
        "lagflow_sim_measure",
        "lagflow_sim_free",
        "lagflow_last_error_message",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}
