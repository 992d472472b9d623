//! Run configuration: a strict JSON document (unknown keys rejected, so a
//! typo cannot silently change an acceptance run).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::torusmap::ShearSpec;
use crate::{Error, Result};

/// Initial data: either a shear composition sampled at t = 0 or a snapshot
/// file to continue from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    Shears(ShearSpec),
    Snapshot(PathBuf),
}

fn default_sigma() -> f64 {
    0.2
}

fn default_diag_every() -> u64 {
    50
}

/// One run or verification request.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Grid resolution (nodes per axis); even, ≥ 8.
    pub n: usize,
    /// CFL safety factor in (0, 0.5].
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Flow horizon; the run may stop earlier on convergence.
    pub t_end: f64,
    /// Ambient curvature sign. Flow runs require 0; the pointwise formula
    /// suites accept −1, 0, 1.
    #[serde(default)]
    pub c: i32,
    pub initial: InitialData,
    pub out_dir: PathBuf,
    /// Diagnostic cadence in steps (≥ 1).
    #[serde(default = "default_diag_every")]
    pub diag_every: u64,
    /// Snapshot cadence in steps; 0 disables periodic snapshots.
    #[serde(default)]
    pub snapshot_every: u64,
    /// Residual sampling cadence in diagnostic records; 0 disables.
    #[serde(default)]
    pub residual_every: u64,
    /// Seed of the randomized verification suites.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parses and validates a config document, with position information on
    /// syntax or schema errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {}", e.line(), e.column(), e))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        crate::grid::validate_resolution(self.n)
            .map_err(|_| Error::Config(format!("n must be even and >= 8, got {}", self.n)))?;
        if !(self.sigma > 0.0 && self.sigma <= 0.5) {
            return Err(Error::Config(format!(
                "sigma must lie in (0, 0.5], got {}",
                self.sigma
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(-1..=1).contains(&self.c) {
            return Err(Error::Config(format!("c must be one of -1, 0, 1, got {}", self.c)));
        }
        if self.diag_every == 0 {
            return Err(Error::Config("diag_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Flow runs are only defined for the flat ambient case. Requests with
    /// c ≠ 0 are rejected up front rather than silently running c = 0.
    pub fn validate_for_flow(&self) -> Result<()> {
        if self.c != 0 {
            return Err(Error::Config(format!(
                "flow runs require c = 0 (flat ambient factors); got c = {}. \
                 The c = ±1 ambient flows are out of scope; c only enters the \
                 pointwise formula suites of `verify`.",
                self.c
            )));
        }
        Ok(())
    }
}
