//! Time integration of the nonparametric mean curvature flow of the graph.
//!
//! The surface stays in graph gauge: the unknown is the periodic
//! displacement u and each node moves with ambient velocity V = (0, ∂ₜu),
//! ∂ₜu = gⁱʲ∂ᵢ∂ⱼu componentwise. The normal part of V is the mean curvature
//! vector, so the swept surfaces agree with the normal-velocity flow up to a
//! tangential reparametrization T, and every gauge-dependent diagnostic
//! carries the material-derivative correction Dₜφ = ∂ₜφ − Tᵏ∂ₖφ.
//!
//! Stepping is classical RK4 with dt = σh²/λmax, λmax the largest eigenvalue
//! of gⁱʲ over the grid, recomputed from the first stage of each step.

use rayon::prelude::*;

use crate::geometry::GeometryCache;
use crate::grid::{self, ScalarField, VectorField};
use crate::torusmap::TorusMap;
use crate::{Error, Result};

/// Minimum admissible grid value of η before the run aborts; the graph
/// condition has failed well before this for c = 0 data.
pub const MIN_ETA_ABORT: f64 = 1e-3;

/// One time slice of the flow.
pub struct FlowState {
    t: f64,
    map: TorusMap,
    dt_last: f64,
    geom: Option<GeometryCache>,
}

impl FlowState {
    pub fn new(map: TorusMap) -> Self {
        Self { t: 0.0, map, dt_last: 0.0, geom: None }
    }

    pub fn at_time(map: TorusMap, t: f64) -> Self {
        Self { t, map, dt_last: 0.0, geom: None }
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.t
    }

    #[inline]
    pub fn dt_last(&self) -> f64 {
        self.dt_last
    }

    pub fn map(&self) -> &TorusMap {
        &self.map
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    /// Rebuild the geometry cache if the map changed since the last build.
    pub fn ensure_geometry(&mut self) -> Result<()> {
        if self.geom.is_none() {
            self.geom = Some(GeometryCache::build(&self.map)?);
        }
        Ok(())
    }

    /// The current geometry; `ensure_geometry` must have run since the last
    /// step.
    pub fn geometry(&self) -> &GeometryCache {
        self.geom.as_ref().expect("geometry stale: call ensure_geometry() first")
    }

    /// A copy of the trajectory data only (geometry is rebuilt on demand).
    pub fn fork(&self) -> FlowState {
        FlowState { t: self.t, map: self.map.clone(), dt_last: self.dt_last, geom: None }
    }
}

/// CFL step control; dt = sigma·h²/λmax.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub sigma: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { sigma: 0.2 }
    }
}

/// Scratch buffers for the velocity evaluation and the RK4 stages.
pub struct Workspace {
    n: usize,
    du: [ScalarField; 4],
    d2: [ScalarField; 6],
    vel: VectorField,
    stage_u: VectorField,
    k: [VectorField; 4],
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            du: std::array::from_fn(|_| ScalarField::zeros(n)),
            d2: std::array::from_fn(|_| ScalarField::zeros(n)),
            vel: VectorField::zeros(n),
            stage_u: VectorField::zeros(n),
            k: std::array::from_fn(|_| VectorField::zeros(n)),
        }
    }
}

/// Per-step safety information gathered from the first stage.
#[derive(Debug, Clone, Copy)]
struct StageInfo {
    min_det_g: f64,
    max_inv_eigenvalue: f64,
}

/// Grids at or above this size run the pointwise stage row-parallel; below
/// it the fork-join overhead exceeds the work on small grids.
const PAR_MIN_N: usize = 128;

/// ∂ₜu = gⁱʲ∂ᵢ∂ⱼu evaluated into `vel`; with `want_info` also gathers the
/// CFL and graph-condition extrema (used on the first stage of a step).
fn velocity_stage(
    linear: [[i64; 2]; 2],
    u: &VectorField,
    du: &mut [ScalarField; 4],
    d2: &mut [ScalarField; 6],
    vel: &mut VectorField,
    want_info: bool,
) -> StageInfo {
    let n = u.n();
    grid::deriv_x_with_xx(&u.x, &mut du[0], &mut d2[0]);
    grid::deriv_y_with_yy(&u.x, &mut du[1], &mut d2[2]);
    grid::deriv_x_with_xx(&u.y, &mut du[2], &mut d2[3]);
    grid::deriv_y_with_yy(&u.y, &mut du[3], &mut d2[5]);
    grid::deriv_y(&du[0], &mut d2[1]); // u¹ₓᵧ
    grid::deriv_y(&du[2], &mut d2[4]); // u²ₓᵧ

    let l = [
        [linear[0][0] as f64, linear[0][1] as f64],
        [linear[1][0] as f64, linear[1][1] as f64],
    ];
    let du = &*du;
    let d2 = &*d2;

    let row_body = |j: usize, vx: &mut [f64], vy: &mut [f64]| -> (f64, f64) {
        let base = j * n;
        let ux_x = &du[0].as_slice()[base..base + n];
        let ux_y = &du[1].as_slice()[base..base + n];
        let uy_x = &du[2].as_slice()[base..base + n];
        let uy_y = &du[3].as_slice()[base..base + n];
        let xx1 = &d2[0].as_slice()[base..base + n];
        let xy1 = &d2[1].as_slice()[base..base + n];
        let yy1 = &d2[2].as_slice()[base..base + n];
        let xx2 = &d2[3].as_slice()[base..base + n];
        let xy2 = &d2[4].as_slice()[base..base + n];
        let yy2 = &d2[5].as_slice()[base..base + n];
        let mut min_det = f64::INFINITY;
        let mut max_lam = 0.0f64;
        for i in 0..n {
            let df11 = l[0][0] + ux_x[i];
            let df12 = l[0][1] + ux_y[i];
            let df21 = l[1][0] + uy_x[i];
            let df22 = l[1][1] + uy_y[i];
            let g11 = 1.0 + df11 * df11 + df21 * df21;
            let g12 = df11 * df12 + df21 * df22;
            let g22 = 1.0 + df12 * df12 + df22 * df22;
            let det = g11 * g22 - g12 * g12;
            let inv = 1.0 / det;
            let a = g22 * inv;
            let b = -g12 * inv;
            let d = g11 * inv;
            if want_info {
                min_det = min_det.min(det);
                let half_tr = 0.5 * (a + d);
                let disc = (half_tr * half_tr - inv).max(0.0).sqrt();
                max_lam = max_lam.max(half_tr + disc);
            }
            vx[i] = a * xx1[i] + 2.0 * b * xy1[i] + d * yy1[i];
            vy[i] = a * xx2[i] + 2.0 * b * xy2[i] + d * yy2[i];
        }
        (min_det, max_lam)
    };

    // Per-row extrema folded in index order; identical arithmetic on either
    // execution path.
    let row_info: Vec<(f64, f64)> = if n >= PAR_MIN_N {
        vel.x
            .as_mut_slice()
            .par_chunks_mut(n)
            .zip(vel.y.as_mut_slice().par_chunks_mut(n))
            .enumerate()
            .map(|(j, (vx, vy))| row_body(j, vx, vy))
            .collect()
    } else {
        vel.x
            .as_mut_slice()
            .chunks_mut(n)
            .zip(vel.y.as_mut_slice().chunks_mut(n))
            .enumerate()
            .map(|(j, (vx, vy))| row_body(j, vx, vy))
            .collect()
    };

    let mut info = StageInfo { min_det_g: f64::INFINITY, max_inv_eigenvalue: 0.0 };
    for (dmin, lmax) in row_info {
        info.min_det_g = info.min_det_g.min(dmin);
        info.max_inv_eigenvalue = info.max_inv_eigenvalue.max(lmax);
    }
    info
}

/// Nonparametric flow velocity ∂ₜu as a field; the ambient velocity
/// V = (0, ∂ₜu) satisfies V^⊥ = H.
pub fn velocity(state: &FlowState) -> VectorField {
    let mut ws = Workspace::new(state.n());
    velocity_stage(
        state.map.linear(),
        state.map.disp(),
        &mut ws.du,
        &mut ws.d2,
        &mut ws.vel,
        false,
    );
    ws.vel
}

/// Index-raised tangential components Tᵏ = gᵏˡ⟨V, F_*∂ₗ⟩ of the gauge
/// velocity; the material derivative of a scalar under the normal-velocity
/// flow is Dₜφ = ∂ₜφ − Tᵏ∂ₖφ.
pub fn tangential_velocity(state: &FlowState) -> VectorField {
    let geom = state.geometry();
    let vel = velocity(state);
    let n = state.n();
    let mut out = VectorField::zeros(n);
    let jac = geom.jac.as_slice();
    let metric = &geom.metric;
    out.x
        .as_mut_slice()
        .par_iter_mut()
        .zip(out.y.as_mut_slice().par_iter_mut())
        .enumerate()
        .for_each(|(idx, (tx, ty))| {
            let df = jac[idx];
            let v = [vel.x.as_slice()[idx], vel.y.as_slice()[idx]];
            // ⟨V, τ_l⟩ = Σ_a v_a ∂_l f^a (only the second factor of the
            // product contributes).
            let c = [
                v[0] * df[0][0] + v[1] * df[1][0],
                v[0] * df[0][1] + v[1] * df[1][1],
            ];
            let t = metric[idx].raise(c);
            *tx = t[0];
            *ty = t[1];
        });
    out
}

fn rk4_combine(u: &VectorField, k: &[VectorField; 4], dt: f64, out: &mut VectorField) {
    let c = dt / 6.0;
    for comp in 0..2 {
        let (us, k1, k2, k3, k4, os) = match comp {
            0 => (&u.x, &k[0].x, &k[1].x, &k[2].x, &k[3].x, &mut out.x),
            _ => (&u.y, &k[0].y, &k[1].y, &k[2].y, &k[3].y, &mut out.y),
        };
        let it = os
            .as_mut_slice()
            .iter_mut()
            .zip(us.as_slice())
            .zip(k1.as_slice())
            .zip(k2.as_slice())
            .zip(k3.as_slice())
            .zip(k4.as_slice());
        for (((((o, &uv), &a), &b), &cc), &d) in it {
            *o = uv + c * (a + 2.0 * b + 2.0 * cc + d);
        }
    }
}

fn stage_advance(u: &VectorField, k: &VectorField, a: f64, out: &mut VectorField) {
    for comp in 0..2 {
        let (us, ks, os) = match comp {
            0 => (&u.x, &k.x, &mut out.x),
            _ => (&u.y, &k.y, &mut out.y),
        };
        for ((o, &uv), &kv) in os.as_mut_slice().iter_mut().zip(us.as_slice()).zip(ks.as_slice())
        {
            *o = uv + a * kv;
        }
    }
}

fn check_state(info: &StageInfo, t: f64) -> Result<()> {
    if !info.min_det_g.is_finite() || !info.max_inv_eigenvalue.is_finite() {
        return Err(Error::Integration { t, reason: "non-finite metric".into() });
    }
    let min_eta = 2.0 / info.min_det_g.sqrt();
    if min_eta < MIN_ETA_ABORT {
        return Err(Error::Integration {
            t,
            reason: format!("graph condition failing: min eta = {min_eta:.3e}"),
        });
    }
    Ok(())
}

/// One classical RK4 step with the given dt. Geometry is rebuilt lazily
/// afterwards; on failure the state is left untouched.
pub fn step_fixed(state: &mut FlowState, dt: f64, ws: &mut Workspace) -> Result<()> {
    step_inner(state, Some(dt), &StepControl::default(), f64::INFINITY, ws).map(|_| ())
}

/// One RK4 step with dt = sigma·h²/λmax (capped at t_end − t); returns the
/// dt taken.
pub fn step_auto(
    state: &mut FlowState,
    control: &StepControl,
    t_end: f64,
    ws: &mut Workspace,
) -> Result<f64> {
    step_inner(state, None, control, t_end, ws)
}

fn step_inner(
    state: &mut FlowState,
    fixed_dt: Option<f64>,
    control: &StepControl,
    t_end: f64,
    ws: &mut Workspace,
) -> Result<f64> {
    assert!(control.sigma > 0.0 && control.sigma <= 0.5, "sigma out of (0, 0.5]");
    let n = state.n();
    assert_eq!(ws.n, n, "workspace resolution mismatch");
    let linear = state.map.linear();
    let h = 1.0 / n as f64;

    // Stage 1 also yields the CFL data for this step.
    let info = velocity_stage(linear, state.map.disp(), &mut ws.du, &mut ws.d2, &mut ws.vel, true);
    check_state(&info, state.t)?;
    let dt = match fixed_dt {
        Some(dt) => dt,
        None => {
            let cfl = control.sigma * h * h / info.max_inv_eigenvalue;
            cfl.min(t_end - state.t)
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Integration { t: state.t, reason: format!("bad dt = {dt}") });
    }
    std::mem::swap(&mut ws.vel, &mut ws.k[0]);

    for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
        // stage_u = u + frac·dt·k_prev, then k_stage = velocity(stage_u).
        stage_advance(state.map.disp(), &ws.k[stage - 1], frac * dt, &mut ws.stage_u);
        velocity_stage(linear, &ws.stage_u, &mut ws.du, &mut ws.d2, &mut ws.vel, false);
        std::mem::swap(&mut ws.vel, &mut ws.k[stage]);
    }

    rk4_combine(state.map.disp(), &ws.k, dt, &mut ws.stage_u);
    if !ws.stage_u.is_finite() {
        return Err(Error::Integration {
            t: state.t,
            reason: "non-finite displacement after step".into(),
        });
    }
    std::mem::swap(state.map.disp_mut(), &mut ws.stage_u);
    state.t += dt;
    state.dt_last = dt;
    state.geom = None;
    Ok(dt)
}
