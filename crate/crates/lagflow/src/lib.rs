//! Mean curvature flow of the graph of an area-preserving map of the flat
//! 2-torus, together with the verification machinery for the quantities that
//! control it: the Jacobian-of-projection function η, the fully symmetric
//! second fundamental form of the Lagrangian graph, the monotone integral
//! ∫|H|²/η, and the pointwise curvature inequalities.
//!
//! The evolving unknown is a map f = Lx + u(x) of T² = R²/Z² with det L = 1
//! and u a smooth periodic displacement. Its graph in T²×T² is Lagrangian for
//! ω₁ − ω₂ exactly when det Df = 1; the flow is integrated in graph gauge
//! (∂ₜu = gⁱʲ∂ᵢ∂ⱼu) on an N×N periodic grid with 4th-order centered
//! differences and classical RK4 time stepping.
//!
//! Module map:
//! - [`tensoralg`]: pointwise metric-aware tensor algebra and the curvature
//!   inequalities (|H|² ≤ (4/3)|A|², Cauchy–Schwarz, square completion).
//! - [`grid`]: periodic scalar/vector fields, stencils, exact summation.
//! - [`torusmap`]: area-preserving maps, shear compositions, snapshots.
//! - [`geometry`]: induced metric, η, second fundamental form, Christoffels,
//!   Laplace–Beltrami, quadrature.
//! - [`flow`]: graph-gauge RK4 integration with CFL step control.
//! - [`diagnostics`]: monotonicity, lower-bound, Gauss-identity and
//!   evolution-equation residual checks; CSV records.
//! - [`verify`]: seeded randomized property suites and refinement studies.
//! - [`config`] / [`runner`]: JSON run configuration and CLI orchestration.

pub mod config;
pub mod diagnostics;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod runner;
pub mod tensoralg;
pub mod torusmap;
pub mod verify;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("metric not positive definite: g11={g11}, g12={g12}, g22={g22}")]
    MetricNotSpd { g11: f64, g12: f64, g22: f64 },
    #[error("eta = {0} outside the admissible range (0, 1 + 1e-9]")]
    EtaRange(f64),
    #[error("initial minimum of eta must lie in (0, 1], got {0}")]
    EtaMinRange(f64),
    #[error("grid resolution must be even and >= 8, got {0}")]
    BadResolution(usize),
    #[error("time samples are not uniformly spaced: dt = {0} vs {1}")]
    NonUniformDt(f64, f64),
    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Configures the global worker pool from the `LAGFLOW_THREADS` environment
/// variable. Idempotent; later calls are no-ops. Without the variable the
/// pool uses one worker per available core.
pub fn init_threads() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        if let Ok(v) = std::env::var("LAGFLOW_THREADS") {
            if let Ok(k) = v.trim().parse::<usize>() {
                if k >= 1 {
                    // Ignore failure: a pool may already exist in-process.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(k)
                        .build_global();
                }
            }
        }
    });
}
