//! Command-line driver: flow runs, verification suites, and snapshot resume.
//!
//! Usage:
//!   lagflow run <config.json>
//!   lagflow verify <config.json>
//!   lagflow resume <snapshot> <config.json>
//!
//! Exit codes: 0 clean; 1 malformed config/snapshot or bad usage;
//! 2 property violation; 3 integration failure.
//! `LAGFLOW_THREADS` caps the worker count.

use std::path::Path;
use std::process::ExitCode;

use lagflow::config::RunConfig;
use lagflow::runner;
use lagflow::Error;

const USAGE: &str = "usage:
  lagflow run <config.json>
  lagflow verify <config.json>
  lagflow resume <snapshot> <config.json>";

fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Snapshot(_) | Error::BadResolution(_) => 1,
        Error::Integration { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    lagflow::init_threads();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match args.as_slice() {
        [cmd, cfg_path] if cmd == "run" => cmd_run(Path::new(cfg_path)),
        [cmd, cfg_path] if cmd == "verify" => cmd_verify(Path::new(cfg_path)),
        [cmd, snap, cfg_path] if cmd == "resume" => {
            cmd_resume(Path::new(snap), Path::new(cfg_path))
        }
        _ => {
            eprintln!("{USAGE}");
            1
        }
    };
    ExitCode::from(code)
}

fn load_config(path: &Path) -> Result<RunConfig, u8> {
    RunConfig::from_file(path).map_err(|e| {
        eprintln!("error: {e}");
        error_exit_code(&e)
    })
}

fn cmd_run(cfg_path: &Path) -> u8 {
    let cfg = match load_config(cfg_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match runner::run_flow(&cfg) {
        Ok(outcome) => {
            if let Some(err) = &outcome.report.integration_error {
                eprintln!("integration failure: {err}");
            }
            println!(
                "run finished: t = {:.6}, steps = {}, converged = {}, outputs in {}",
                outcome.report.t_final,
                outcome.report.steps,
                outcome.report.converged,
                cfg.out_dir.display()
            );
            outcome.exit_code as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn cmd_verify(cfg_path: &Path) -> u8 {
    let cfg = match load_config(cfg_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match runner::run_verify(&cfg) {
        Ok((report, code)) => {
            for check in &report.checks {
                let status = if check.pass { "pass" } else { "FAIL" };
                println!(
                    "{status}  {}: {:e} {} {:e}",
                    check.name, check.worst, check.direction, check.threshold
                );
                if let Some(sample) = &check.failing_sample {
                    println!("      {sample}");
                }
            }
            code as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn cmd_resume(snapshot: &Path, cfg_path: &Path) -> u8 {
    let cfg = match load_config(cfg_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match runner::run_resume(snapshot, &cfg) {
        Ok(outcome) => {
            if let Some(err) = &outcome.report.integration_error {
                eprintln!("integration failure: {err}");
            }
            println!(
                "resume finished: t = {:.6}, steps = {}, outputs in {}",
                outcome.report.t_final,
                outcome.report.steps,
                cfg.out_dir.display()
            );
            outcome.exit_code as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}
