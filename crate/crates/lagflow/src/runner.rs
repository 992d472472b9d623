//! Orchestration of flow runs and verification suites: drives the time loop,
//! samples diagnostics and residuals, writes `diagnostics.csv`,
//! `report.json`, `verify.json` and snapshots, and condenses the outcome
//! into an exit code.
//!
//! Exit codes: 0 clean; 1 malformed config or snapshot; 2 an acceptance
//! property was violated; 3 integration failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{InitialData, RunConfig};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::flow::{self, FlowState, StepControl, Workspace};
use crate::torusmap::TorusMap;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_CONFIG: i32 = 1;
pub const EXIT_PROPERTY_VIOLATION: i32 = 2;
pub const EXIT_INTEGRATION_FAILURE: i32 = 3;

/// Convergence detector: stop once sup|H| stays below this for
/// [`CONVERGENCE_RECORDS`] consecutive diagnostic records.
pub const CONVERGENCE_SUP_H: f64 = 1e-5;
pub const CONVERGENCE_RECORDS: usize = 10;

/// Per-property summary in `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// False when the property is vacuous for this run (e.g. the Gauss
    /// ratio on a flat run with |A|² = 0).
    pub enforced: bool,
}

impl PropertyCheck {
    fn at_most(value: f64, threshold: f64) -> Self {
        Self { value, threshold, pass: value <= threshold, enforced: true }
    }

    fn at_least(value: f64, threshold: f64) -> Self {
        Self { value, threshold, pass: value >= threshold, enforced: true }
    }

    fn vacuous() -> Self {
        Self { value: 0.0, threshold: 0.0, pass: true, enforced: false }
    }

    fn ok(&self) -> bool {
        self.pass || !self.enforced
    }
}

/// Everything `report.json` carries about one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub sigma: f64,
    pub c: i32,
    pub t_end: f64,
    pub t_final: f64,
    pub steps: u64,
    pub converged: bool,
    /// Max per-interval increase of M = ∫|H|²/η relative to M(0).
    pub monotonicity: PropertyCheck,
    /// Worst min η(t) − bound(t) margin.
    pub eta_lower_bound: PropertyCheck,
    /// Worst M − ∫|H|² (sign convention: ≥ 0 means the bound holds).
    pub h2_below_m: PropertyCheck,
    /// Max |∫|A|² − ∫|H|²| / ∫|A|² over records with nonvanishing |A|².
    pub gauss_ratio: PropertyCheck,
    /// ∫|H|²(end)/∫|H|²(0), enforced when the run converged.
    pub h2_decay: PropertyCheck,
    pub max_det_drift: f64,
    pub max_sym_defect: f64,
    pub final_sup_h: f64,
    /// sup-norm distance of the final displacement from its mean: distance
    /// to an exact translation.
    pub translation_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration_error: Option<String>,
    pub all_pass: bool,
}

pub struct RunOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub report: RunReport,
    pub exit_code: i32,
}

fn initial_state(cfg: &RunConfig) -> Result<FlowState> {
    match &cfg.initial {
        InitialData::Shears(spec) => {
            Ok(FlowState::new(TorusMap::from_shears(spec, cfg.n)?))
        }
        InitialData::Snapshot(path) => {
            let (map, t) = TorusMap::read_snapshot_file(path)?;
            if map.n() != cfg.n {
                return Err(Error::Config(format!(
                    "snapshot resolution {} does not match config n = {}",
                    map.n(),
                    cfg.n
                )));
            }
            Ok(FlowState::at_time(map, t))
        }
    }
}

/// Runs the flow described by `cfg`, writing outputs into `cfg.out_dir`.
pub fn run_flow(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    cfg.validate_for_flow()?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    let mut state = initial_state(cfg)?;
    let control = StepControl { sigma: cfg.sigma };
    let mut ws = Workspace::new(cfg.n);

    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut integration_error = None;
    let mut steps: u64 = 0;
    let mut consecutive_small = 0usize;
    let mut converged = false;

    let take_record = |state: &mut FlowState,
                       records: &mut Vec<DiagnosticsRecord>|
     -> Result<bool> {
        let mut rec = diagnostics::measure(state)?;
        let record_index = records.len() as u64;
        if cfg.residual_every > 0 && record_index.is_multiple_of(cfg.residual_every) {
            let (mut p, mut m, mut x) = diagnostics::residual_triple(state, cfg.sigma)?;
            rec.residual_eq1 = Some(diagnostics::residual_eq1(&mut p, &mut m, &mut x, cfg.c)?);
            rec.residual_eq4 = Some(diagnostics::residual_eq4(&mut p, &mut m, &mut x, cfg.c)?);
        }
        let small = rec.sup_h < CONVERGENCE_SUP_H;
        records.push(rec);
        Ok(small)
    };

    // Initial record (t_end = 0 yields exactly this one row).
    match take_record(&mut state, &mut records) {
        Ok(small) => {
            if small {
                consecutive_small = 1;
            }
        }
        Err(e) => integration_error = Some(format!("{e}")),
    }

    let t_eps = 1e-12 * (1.0 + cfg.t_end.abs());
    let mut last_recorded_step = 0u64;
    if integration_error.is_none() {
        while cfg.t_end - state.t() > t_eps {
            if consecutive_small >= CONVERGENCE_RECORDS {
                converged = true;
                break;
            }
            match flow::step_auto(&mut state, &control, cfg.t_end, &mut ws) {
                Ok(_) => {}
                Err(e) => {
                    integration_error = Some(format!("{e}"));
                    break;
                }
            }
            steps += 1;
            if cfg.snapshot_every > 0 && steps.is_multiple_of(cfg.snapshot_every) {
                let path = cfg.out_dir.join(format!("snapshot_{steps:08}.snap"));
                state.map().write_snapshot_file(&path, state.t())?;
            }
            let due = steps.is_multiple_of(cfg.diag_every) || cfg.t_end - state.t() <= t_eps;
            if due {
                match take_record(&mut state, &mut records) {
                    Ok(small) => {
                        consecutive_small = if small { consecutive_small + 1 } else { 0 };
                        last_recorded_step = steps;
                    }
                    Err(e) => {
                        integration_error = Some(format!("{e}"));
                        break;
                    }
                }
            }
        }
        // Make sure the final state is recorded even off-cadence.
        if integration_error.is_none() && last_recorded_step != steps && steps > 0 {
            if let Err(e) = take_record(&mut state, &mut records) {
                integration_error = Some(format!("{e}"));
            }
        }
    }

    if integration_error.is_none() {
        state
            .map()
            .write_snapshot_file(&cfg.out_dir.join("snapshot_final.snap"), state.t())?;
    }

    let report = build_report(cfg, &state, &records, converged, steps, integration_error);
    write_outputs(&cfg.out_dir, &records, &report)?;

    let exit_code = if report.integration_error.is_some() {
        EXIT_INTEGRATION_FAILURE
    } else if !report.all_pass {
        EXIT_PROPERTY_VIOLATION
    } else {
        EXIT_OK
    };
    Ok(RunOutcome { records, report, exit_code })
}

fn build_report(
    cfg: &RunConfig,
    state: &FlowState,
    records: &[DiagnosticsRecord],
    converged: bool,
    steps: u64,
    integration_error: Option<String>,
) -> RunReport {
    let m0 = records.first().map_or(0.0, |r| r.m_h2_over_eta);
    let t_final = state.t();

    let mono = diagnostics::check_monotonicity(records, cfg.c);
    let monotonicity = if m0 > 0.0 {
        PropertyCheck::at_most(mono.max_violation, 1e-4 * m0)
    } else {
        // Flat runs: M must stay at numerical zero.
        let max_m = records.iter().fold(0.0f64, |a, r| a.max(r.m_h2_over_eta));
        PropertyCheck::at_most(max_m, 1e-12)
    };

    let eta_margin = diagnostics::check_eta_lower_bound(records, cfg.c).unwrap_or(-1.0);
    let eta_lower_bound = PropertyCheck::at_least(eta_margin, -1e-6 * (1.0 + t_final));

    let decay = diagnostics::check_h2_decay(records);
    let h2_below_m =
        PropertyCheck::at_least(decay.worst_h2_vs_m, -1e-12 * m0.max(1.0));

    let mut gauss_ratio = 0.0f64;
    let mut gauss_seen = false;
    for r in records {
        if r.i_a2 > 1e-10 {
            gauss_seen = true;
            gauss_ratio = gauss_ratio.max(r.gauss_gap / r.i_a2);
        }
    }
    let gauss = if gauss_seen {
        PropertyCheck::at_most(gauss_ratio, 0.01)
    } else {
        PropertyCheck::vacuous()
    };

    let i_h2_0 = records.first().map_or(0.0, |r| r.i_h2);
    let h2_decay = if converged && i_h2_0 > 0.0 {
        PropertyCheck::at_most(decay.decay_ratio, 0.01)
    } else {
        PropertyCheck::vacuous()
    };

    let max_det_drift = records.iter().fold(0.0f64, |a, r| a.max(r.det_drift));
    let max_sym_defect = records.iter().fold(0.0f64, |a, r| a.max(r.sym_defect));
    let final_sup_h = records.last().map_or(0.0, |r| r.sup_h);

    let u = state.map().disp();
    let mx = u.x.mean();
    let my = u.y.mean();
    let mut translation_distance = 0.0f64;
    for &v in u.x.as_slice() {
        translation_distance = translation_distance.max((v - mx).abs());
    }
    for &v in u.y.as_slice() {
        translation_distance = translation_distance.max((v - my).abs());
    }

    let all_pass = integration_error.is_none()
        && monotonicity.ok()
        && eta_lower_bound.ok()
        && h2_below_m.ok()
        && gauss.ok()
        && h2_decay.ok();

    RunReport {
        n: cfg.n,
        sigma: cfg.sigma,
        c: cfg.c,
        t_end: cfg.t_end,
        t_final,
        steps,
        converged,
        monotonicity,
        eta_lower_bound,
        h2_below_m,
        gauss_ratio: gauss,
        h2_decay,
        max_det_drift,
        max_sym_defect,
        final_sup_h,
        translation_distance,
        integration_error,
        all_pass,
    }
}

fn write_outputs(
    out_dir: &Path,
    records: &[DiagnosticsRecord],
    report: &RunReport,
) -> Result<()> {
    let mut csv = String::with_capacity(records.len() * 256);
    csv.push_str(diagnostics::CSV_HEADER);
    csv.push('\n');
    for r in records {
        let _ = writeln!(csv, "{}", r.csv_row());
    }
    std::fs::write(out_dir.join("diagnostics.csv"), csv)?;

    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    std::fs::write(out_dir.join("report.json"), json + "\n")?;
    Ok(())
}

/// Runs the randomized verification suites and writes `verify.json`.
pub fn run_verify(cfg: &RunConfig) -> Result<(crate::verify::VerifyReport, i32)> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let opts = crate::verify::VerifyOptions::new(cfg.seed);
    let report = crate::verify::run(&opts);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("verify serialization: {e}")))?;
    std::fs::write(cfg.out_dir.join("verify.json"), json + "\n")?;
    let code = if report.all_pass { EXIT_OK } else { EXIT_PROPERTY_VIOLATION };
    Ok((report, code))
}

/// `resume`: continue a run from a snapshot file under a given config. The
/// config's `initial` is overridden by the snapshot.
pub fn run_resume(snapshot: &Path, cfg: &RunConfig) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.initial = InitialData::Snapshot(PathBuf::from(snapshot));
    run_flow(&cfg)
}
