//! C ABI over the lagflow simulator.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! numeric results cross the boundary in plain `repr(C)` structs. Functions
//! return [`LagflowStatus`] (or null for constructors); the most recent
//! error message is available per thread through
//! [`lagflow_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};

use lagflow::config::RunConfig;
use lagflow::diagnostics;
use lagflow::flow::{self, FlowState, StepControl, Workspace};
use lagflow::runner;
use lagflow::torusmap::TorusMap;

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagflowStatus {
    Ok = 0,
    InvalidArgument = 1,
    PropertyViolation = 2,
    IntegrationFailure = 3,
}

/// One diagnostics row with the numeric fields of the CSV schema.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LagflowDiagnostics {
    pub t: f64,
    pub min_eta: f64,
    /// M = ∫|H|²/η
    pub m_h2_over_eta: f64,
    pub i_h2: f64,
    pub i_a2: f64,
    pub sup_a2: f64,
    pub sup_h: f64,
    pub gauss_gap: f64,
    pub det_drift: f64,
    pub sym_defect: f64,
    pub dt: f64,
}

/// Opaque simulation handle: one flow state plus its step control.
pub struct LagflowSim {
    state: FlowState,
    control: StepControl,
    t_end: f64,
    ws: Workspace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let raw = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(raw).unwrap_or_default();
    });
}

/// Message of the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn lagflow_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn lagflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `ptr` must be null or a NUL-terminated C string.
unsafe fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, LagflowStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        return Err(LagflowStatus::InvalidArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            Err(LagflowStatus::InvalidArgument)
        }
    }
}

fn parse_config(text: &str) -> Result<RunConfig, LagflowStatus> {
    RunConfig::from_json(text).map_err(|e| {
        set_error(format!("{e}"));
        LagflowStatus::InvalidArgument
    })
}

/// Runs a complete flow per the JSON config (same semantics as
/// `lagflow run`); returns the exit code as a status.
///
/// # Safety
/// `config_json` must be a NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn lagflow_run(config_json: *const c_char) -> LagflowStatus {
    let text = match cstr_arg(config_json, "config") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let cfg = match parse_config(text) {
        Ok(c) => c,
        Err(s) => return s,
    };
    match runner::run_flow(&cfg) {
        Ok(outcome) => match outcome.exit_code {
            runner::EXIT_OK => LagflowStatus::Ok,
            runner::EXIT_PROPERTY_VIOLATION => {
                set_error("a run property was violated; see report.json");
                LagflowStatus::PropertyViolation
            }
            _ => {
                set_error(
                    outcome
                        .report
                        .integration_error
                        .unwrap_or_else(|| "integration failure".into()),
                );
                LagflowStatus::IntegrationFailure
            }
        },
        Err(e) => {
            set_error(format!("{e}"));
            LagflowStatus::InvalidArgument
        }
    }
}

/// Runs the randomized verification suites (same semantics as
/// `lagflow verify`).
///
/// # Safety
/// `config_json` must be a NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn lagflow_verify(config_json: *const c_char) -> LagflowStatus {
    let text = match cstr_arg(config_json, "config") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let cfg = match parse_config(text) {
        Ok(c) => c,
        Err(s) => return s,
    };
    match runner::run_verify(&cfg) {
        Ok((_, code)) if code == runner::EXIT_OK => LagflowStatus::Ok,
        Ok(_) => {
            set_error("verification failed; see verify.json");
            LagflowStatus::PropertyViolation
        }
        Err(e) => {
            set_error(format!("{e}"));
            LagflowStatus::InvalidArgument
        }
    }
}

fn sim_from_config(cfg: &RunConfig, state: FlowState) -> *mut LagflowSim {
    let sim = LagflowSim {
        ws: Workspace::new(state.n()),
        state,
        control: StepControl { sigma: cfg.sigma },
        t_end: cfg.t_end,
    };
    Box::into_raw(Box::new(sim))
}

fn sim_from_parsed(cfg: RunConfig) -> *mut LagflowSim {
    if let Err(e) = cfg.validate_for_flow() {
        set_error(format!("{e}"));
        return std::ptr::null_mut();
    }
    let state = match &cfg.initial {
        lagflow::config::InitialData::Shears(spec) => {
            match TorusMap::from_shears(spec, cfg.n) {
                Ok(map) => FlowState::new(map),
                Err(e) => {
                    set_error(format!("{e}"));
                    return std::ptr::null_mut();
                }
            }
        }
        lagflow::config::InitialData::Snapshot(path) => {
            match TorusMap::read_snapshot_file(path) {
                Ok((map, t)) if map.n() == cfg.n => FlowState::at_time(map, t),
                Ok((map, _)) => {
                    set_error(format!(
                        "snapshot resolution {} does not match config n = {}",
                        map.n(),
                        cfg.n
                    ));
                    return std::ptr::null_mut();
                }
                Err(e) => {
                    set_error(format!("{e}"));
                    return std::ptr::null_mut();
                }
            }
        }
    };
    sim_from_config(&cfg, state)
}

/// Creates a stepping handle from a JSON config. Returns null on error.
///
/// # Safety
/// `config_json` must be a NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_new(config_json: *const c_char) -> *mut LagflowSim {
    let text = match cstr_arg(config_json, "config") {
        Ok(t) => t,
        Err(_) => return std::ptr::null_mut(),
    };
    let cfg = match parse_config(text) {
        Ok(c) => c,
        Err(_) => return std::ptr::null_mut(),
    };
    sim_from_parsed(cfg)
}

/// Creates a stepping handle from a snapshot file, using the config for
/// resolution and step control. Returns null on error.
///
/// # Safety
/// Both arguments must be NUL-terminated C strings.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_from_snapshot(
    snapshot_path: *const c_char,
    config_json: *const c_char,
) -> *mut LagflowSim {
    let path = match cstr_arg(snapshot_path, "snapshot path") {
        Ok(p) => PathBuf::from(p),
        Err(_) => return std::ptr::null_mut(),
    };
    let text = match cstr_arg(config_json, "config") {
        Ok(t) => t,
        Err(_) => return std::ptr::null_mut(),
    };
    let mut cfg = match parse_config(text) {
        Ok(c) => c,
        Err(_) => return std::ptr::null_mut(),
    };
    cfg.initial = lagflow::config::InitialData::Snapshot(path);
    sim_from_parsed(cfg)
}

/// Advances the flow by at most `max_steps` RK4 steps, stopping at the
/// config's t_end.
///
/// # Safety
/// `sim` must be a live handle from `lagflow_sim_new`/`_from_snapshot`.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_step(
    sim: *mut LagflowSim,
    max_steps: u64,
) -> LagflowStatus {
    let sim = match sim.as_mut() {
        Some(s) => s,
        None => {
            set_error("sim handle is null");
            return LagflowStatus::InvalidArgument;
        }
    };
    let t_eps = 1e-12 * (1.0 + sim.t_end.abs());
    for _ in 0..max_steps {
        if sim.t_end - sim.state.t() <= t_eps {
            break;
        }
        if let Err(e) = flow::step_auto(&mut sim.state, &sim.control, sim.t_end, &mut sim.ws)
        {
            set_error(format!("{e}"));
            return LagflowStatus::IntegrationFailure;
        }
    }
    LagflowStatus::Ok
}

/// Current flow time of the handle, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_time(sim: *const LagflowSim) -> f64 {
    match sim.as_ref() {
        Some(s) => s.state.t(),
        None => f64::NAN,
    }
}

/// Fills `out` with the diagnostics of the current slice.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_measure(
    sim: *mut LagflowSim,
    out: *mut LagflowDiagnostics,
) -> LagflowStatus {
    let (sim, out) = match (sim.as_mut(), out.as_mut()) {
        (Some(s), Some(o)) => (s, o),
        _ => {
            set_error("sim or out is null");
            return LagflowStatus::InvalidArgument;
        }
    };
    match diagnostics::measure(&mut sim.state) {
        Ok(rec) => {
            *out = LagflowDiagnostics {
                t: rec.t,
                min_eta: rec.min_eta,
                m_h2_over_eta: rec.m_h2_over_eta,
                i_h2: rec.i_h2,
                i_a2: rec.i_a2,
                sup_a2: rec.sup_a2,
                sup_h: rec.sup_h,
                gauss_gap: rec.gauss_gap,
                det_drift: rec.det_drift,
                sym_defect: rec.sym_defect,
                dt: rec.dt,
            };
            LagflowStatus::Ok
        }
        Err(e) => {
            set_error(format!("{e}"));
            LagflowStatus::IntegrationFailure
        }
    }
}

/// Writes a snapshot of the current state.
///
/// # Safety
/// `sim` must be a live handle and `path` a NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_save_snapshot(
    sim: *const LagflowSim,
    path: *const c_char,
) -> LagflowStatus {
    let sim = match sim.as_ref() {
        Some(s) => s,
        None => {
            set_error("sim handle is null");
            return LagflowStatus::InvalidArgument;
        }
    };
    let path = match cstr_arg(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match sim.state.map().write_snapshot_file(Path::new(path), sim.state.t()) {
        Ok(()) => LagflowStatus::Ok,
        Err(e) => {
            set_error(format!("{e}"));
            LagflowStatus::InvalidArgument
        }
    }
}

/// Releases a handle; null is a no-op.
///
/// # Safety
/// `sim` must be null or a live handle; the pointer is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lagflow_sim_free(sim: *mut LagflowSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
