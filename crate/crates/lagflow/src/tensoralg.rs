//! Pointwise Lagrangian tensor algebra on a single surface node.
//!
//! Everything here is metric-aware and coordinate-frame: tensors carry their
//! coordinate components, and all index raising goes through an explicit
//! [`Metric2`]. Internally the contractions are evaluated by mapping covector
//! components into an orthonormal frame (the upper-triangular factor U with
//! UᵀU = g⁻¹), which turns every norm into a plain sum of squares and keeps
//! the inequality residuals free of sign noise.
//!
//! The pointwise evolution formulas come in a checked flavor (domain-gated,
//! for direct use) and are shared with the field-level residual evaluation
//! in `diagnostics`.

use crate::{Error, Result};

/// Slack admitted on the analytic bound η ≤ 1 to absorb discretization drift.
pub const ETA_SLACK: f64 = 1e-9;

/// Induced metric at one node: symmetric positive definite 2×2, with the
/// inverse, determinant and the orthonormalizing factor precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Metric2 {
    g11: f64,
    g12: f64,
    g22: f64,
    inv11: f64,
    inv12: f64,
    inv22: f64,
    det: f64,
    // Upper-triangular U with UᵀU = g⁻¹; |U·a|² = gⁱʲaᵢaⱼ for covectors a.
    u11: f64,
    u12: f64,
    u22: f64,
}

impl Metric2 {
    pub fn new(g11: f64, g12: f64, g22: f64) -> Result<Self> {
        let det = g11 * g22 - g12 * g12;
        if !(g11 > 0.0 && det > 0.0 && g11.is_finite() && g12.is_finite() && g22.is_finite()) {
            return Err(Error::MetricNotSpd { g11, g12, g22 });
        }
        let inv11 = g22 / det;
        let inv12 = -g12 / det;
        let inv22 = g11 / det;
        let u11 = inv11.sqrt();
        let u12 = inv12 / u11;
        // inv22 - inv12²/inv11 = det(g⁻¹)/inv11 > 0
        let u22 = (inv22 - inv12 * inv12 / inv11).sqrt();
        Ok(Self { g11, g12, g22, inv11, inv12, inv22, det, u11, u12, u22 })
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0).expect("identity metric is SPD")
    }

    pub fn components(&self) -> (f64, f64, f64) {
        (self.g11, self.g12, self.g22)
    }

    /// Inverse components (g¹¹, g¹², g²²).
    pub fn inverse(&self) -> (f64, f64, f64) {
        (self.inv11, self.inv12, self.inv22)
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Raise an index: aᵏ = gᵏˡ aₗ.
    pub fn raise(&self, a: [f64; 2]) -> [f64; 2] {
        [
            self.inv11 * a[0] + self.inv12 * a[1],
            self.inv12 * a[0] + self.inv22 * a[1],
        ]
    }

    /// Inner product of two covectors, gⁱʲ aᵢ bⱼ.
    pub fn inner_cov(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let ra = self.raise(a);
        ra[0] * b[0] + ra[1] * b[1]
    }

    /// Squared norm of a covector, evaluated as |U·a|² so it is nonnegative
    /// in floating point.
    pub fn norm2_cov(&self, a: [f64; 2]) -> f64 {
        let p = self.u11 * a[0] + self.u12 * a[1];
        let q = self.u22 * a[1];
        p * p + q * q
    }

    /// Rows of the orthonormalizing factor U.
    fn frame_rows(&self) -> ([f64; 2], [f64; 2]) {
        ([self.u11, self.u12], [0.0, self.u22])
    }

    /// Condition number λmax/λmin of the metric.
    pub fn condition_number(&self) -> f64 {
        let half_tr = 0.5 * (self.g11 + self.g22);
        let disc = (half_tr * half_tr - self.det).max(0.0).sqrt();
        (half_tr + disc) / (half_tr - disc)
    }

    /// Largest eigenvalue of the inverse metric (sharpest diffusion speed).
    pub fn max_inverse_eigenvalue(&self) -> f64 {
        let half_tr = 0.5 * (self.inv11 + self.inv22);
        let det_inv = 1.0 / self.det;
        let disc = (half_tr * half_tr - det_inv).max(0.0).sqrt();
        half_tr + disc
    }
}

/// Fully symmetric 3-tensor in two dimensions: four independent components,
/// stored by the number of indices equal to 2. Any accessor is invariant
/// under all six index permutations by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SymTensor3 {
    c: [f64; 4],
}

impl SymTensor3 {
    pub fn new(h111: f64, h112: f64, h122: f64, h222: f64) -> Self {
        Self { c: [h111, h112, h122, h222] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Component accessor with 0-based indices in {0, 1}.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(i < 2 && j < 2 && k < 2);
        self.c[i + j + k]
    }

    pub fn components(&self) -> [f64; 4] {
        self.c
    }

    /// Trilinear form h(x, y, z) on three covector arguments... the tensor is
    /// covariant, so the arguments here are plain component pairs and no
    /// metric is involved.
    pub fn apply(&self, x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> f64 {
        self.c[0] * x[0] * y[0] * z[0]
            + self.c[1] * (x[0] * y[0] * z[1] + x[0] * y[1] * z[0] + x[1] * y[0] * z[0])
            + self.c[2] * (x[0] * y[1] * z[1] + x[1] * y[0] * z[1] + x[1] * y[1] * z[0])
            + self.c[3] * x[1] * y[1] * z[1]
    }

    /// Push all three slots through the rows of a 2×2 matrix; used to move
    /// the tensor into the orthonormal frame of a metric.
    fn transform(&self, r1: [f64; 2], r2: [f64; 2]) -> SymTensor3 {
        SymTensor3::new(
            self.apply(r1, r1, r1),
            self.apply(r1, r1, r2),
            self.apply(r1, r2, r2),
            self.apply(r2, r2, r2),
        )
    }

    /// Sum of squared components over the full (not reduced) index range.
    fn frobenius2(&self) -> f64 {
        let [a, b, c, d] = self.c;
        a * a + 3.0 * (b * b + c * c) + d * d
    }

    /// The tensor (Hᵢgⱼₖ + Hⱼgᵢₖ + Hₖgᵢⱼ)/4: the unique fully symmetric
    /// tensor with trace H of minimal norm, i.e. the equality case of
    /// |H|² ≤ (4/3)|A|².
    pub fn symmetrized_trace_part(hcov: [f64; 2], g: &Metric2) -> SymTensor3 {
        let (g11, g12, g22) = g.components();
        let gm = [[g11, g12], [g12, g22]];
        let comp = |i: usize, j: usize, k: usize| {
            0.25 * (hcov[i] * gm[j][k] + hcov[j] * gm[i][k] + hcov[k] * gm[i][j])
        };
        SymTensor3::new(comp(0, 0, 0), comp(0, 0, 1), comp(0, 1, 1), comp(1, 1, 1))
    }

    /// Rank-one tensor v⊗v⊗v.
    pub fn rank_one(v: [f64; 2]) -> SymTensor3 {
        SymTensor3::new(
            v[0] * v[0] * v[0],
            v[0] * v[0] * v[1],
            v[0] * v[1] * v[1],
            v[1] * v[1] * v[1],
        )
    }
}

/// Mean curvature covector Hₖ = gⁱʲ hᵢⱼₖ.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanCurvCovector(pub [f64; 2]);

/// The pointwise curvature scalars of one node.
#[derive(Debug, Clone, Copy, Default)]
pub struct CurvatureScalars {
    /// |A|² = hᵢⱼₖ hᵢ'ⱼ'ₖ' gⁱⁱ'gʲʲ'gᵏᵏ'
    pub a2: f64,
    /// |H|² = gᵏˡ Hₖ Hₗ
    pub h2: f64,
    /// Σᵢⱼ (Σₖ Hᵏ hₖᵢⱼ)² with the free indices raised by g
    pub cross: f64,
}

/// Full metric contractions of a symmetric 3-tensor: |A|², the mean
/// curvature covector and its norm, and the Cauchy–Schwarz cross term.
///
/// All three scalars are evaluated as sums of squares in the orthonormal
/// frame of `g`, so they are nonnegative in floating point.
pub fn norms(h: &SymTensor3, g: &Metric2) -> (CurvatureScalars, MeanCurvCovector) {
    let (r1, r2) = g.frame_rows();
    let t = h.transform(r1, r2);
    let [t111, t112, t122, t222] = t.components();

    let a2 = t.frobenius2();

    // Trace of the frame tensor = frame components of H.
    let w1 = t111 + t122;
    let w2 = t112 + t222;
    let h2 = w1 * w1 + w2 * w2;

    // Pᵖq = Σₖ wₖ tₖₚq in the frame, then cross = |P|².
    let p11 = w1 * t111 + w2 * t112;
    let p12 = w1 * t112 + w2 * t122;
    let p22 = w1 * t122 + w2 * t222;
    let cross = p11 * p11 + 2.0 * p12 * p12 + p22 * p22;

    // Coordinate-frame covector Hₖ = gⁱʲ hᵢⱼₖ, reported exactly as defined.
    let (a, b, d) = g.inverse();
    let [h111, h112, h122, h222] = h.components();
    let hk = [
        a * h111 + 2.0 * b * h112 + d * h122,
        a * h112 + 2.0 * b * h122 + d * h222,
    ];

    (CurvatureScalars { a2, h2, cross }, MeanCurvCovector(hk))
}

/// Residual of the fully-symmetric-tensor inequality: (4/3)|A|² − |H|².
/// Nonnegative up to rounding for every symmetric h and SPD g.
pub fn check_h_inequality(h: &SymTensor3, g: &Metric2) -> f64 {
    let (s, _) = norms(h, g);
    (4.0 / 3.0) * s.a2 - s.h2
}

/// Residual of the Cauchy–Schwarz bound: |H|²|A|² − Σ(Hᵏhₖᵢⱼ)².
pub fn check_cauchy_schwarz(h: &SymTensor3, g: &Metric2) -> f64 {
    let (s, _) = norms(h, g);
    s.h2 * s.a2 - s.cross
}

/// Both sides of the square-completion step used to close the monotonicity
/// estimate:
///
/// lhs = [4η·H·⟨∇η,∇H⟩ − 2|∇η|²H² − 2η²|∇H|²]/η³,
/// rhs = −2|∇η·H − η·∇H|²/η³,
///
/// an exact algebraic identity (H here is the scalar |H|).
pub fn square_completion_identity(
    eta: f64,
    h: f64,
    grad_eta: [f64; 2],
    grad_h: [f64; 2],
    g: &Metric2,
) -> Result<(f64, f64)> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::EtaRange(eta));
    }
    let eta3 = eta * eta * eta;
    let lhs = (4.0 * eta * h * g.inner_cov(grad_eta, grad_h)
        - 2.0 * g.norm2_cov(grad_eta) * h * h
        - 2.0 * eta * eta * g.norm2_cov(grad_h))
        / eta3;
    let diff = [
        grad_eta[0] * h - eta * grad_h[0],
        grad_eta[1] * h - eta * grad_h[1],
    ];
    let rhs = -2.0 * g.norm2_cov(diff) / eta3;
    Ok((lhs, rhs))
}

fn check_eta_domain(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 + ETA_SLACK {
        Ok(())
    } else {
        Err(Error::EtaRange(eta))
    }
}

/// Right-hand side of the η evolution equation,
/// Δη + η(2|A|² − |H|²) + cη(1 − η²).
pub fn eta_rhs(eta: f64, a2: f64, h2: f64, lap_eta: f64, c: i32) -> Result<f64> {
    check_eta_domain(eta)?;
    Ok(eta_rhs_raw(eta, a2, h2, lap_eta, c))
}

/// Ungated form of [`eta_rhs`], shared with the field-level residual
/// evaluation where discretization drift may push η marginally past the
/// analytic bound.
pub(crate) fn eta_rhs_raw(eta: f64, a2: f64, h2: f64, lap_eta: f64, c: i32) -> f64 {
    lap_eta + eta * (2.0 * a2 - h2) + (c as f64) * eta * (1.0 - eta * eta)
}

/// Comparison lower bound for the η equation after substituting
/// |H|² ≤ (4/3)|A|²: Δη + (2/3)|A|²η + cη(1 − η²).
pub fn eta_rhs_lower(eta: f64, a2: f64, lap_eta: f64, c: i32) -> Result<f64> {
    check_eta_domain(eta)?;
    Ok(lap_eta + (2.0 / 3.0) * a2 * eta + (c as f64) * eta * (1.0 - eta * eta))
}

/// Non-Laplacian part of the |H|² evolution equation:
/// −2|∇H|² + 2·cross + c(2 − η²)|H|².
pub fn h2_rhs(h2: f64, grad_h_norm2: f64, cross: f64, eta: f64, c: i32) -> Result<f64> {
    check_eta_domain(eta)?;
    if !(h2 >= 0.0 && grad_h_norm2 >= 0.0 && cross >= 0.0) {
        return Err(Error::EtaRange(eta));
    }
    Ok(h2_rhs_raw(h2, grad_h_norm2, cross, eta, c))
}

pub(crate) fn h2_rhs_raw(h2: f64, grad_h_norm2: f64, cross: f64, eta: f64, c: i32) -> f64 {
    -2.0 * grad_h_norm2 + 2.0 * cross + (c as f64) * (2.0 - eta * eta) * h2
}

/// Comparison-theorem lower bound for min η:
/// αe^{ct}/√(1 + α²e^{2ct}) with α/√(1+α²) = min η at t = 0.
///
/// For c = 0 the bound is constant and the (clamped) initial minimum is
/// returned exactly. The clamp m ≤ 1 − 1e−12 keeps α finite on identity
/// initial data; the clamped bound is still valid since the expression is
/// monotone in m.
pub fn eta_lower_bound(min_eta0: f64, c: i32, t: f64) -> Result<f64> {
    if !(min_eta0 > 0.0 && min_eta0 <= 1.0) {
        return Err(Error::EtaMinRange(min_eta0));
    }
    let m = min_eta0.min(1.0 - 1e-12);
    if c == 0 {
        return Ok(m);
    }
    // Evaluate x/√(1+x²) at x = αe^{ct} in log space to stay finite for
    // arbitrarily large ct.
    let ln_alpha = m.ln() - 0.5 * (1.0 - m * m).ln();
    let z = ln_alpha + (c as f64) * t;
    if z >= 0.0 {
        Ok(1.0 / ((-2.0 * z).exp() + 1.0).sqrt())
    } else {
        Ok(z.exp() / (1.0 + (2.0 * z).exp()).sqrt())
    }
}
