//! Discrete differential geometry of the graph Σ = {(x, f(x))} ⊂ T²×T² with
//! the flat product metric.
//!
//! Per node the cache holds the induced metric g = I + DfᵀDf, the projection
//! Jacobian η = 2/√det g, the fully symmetric second fundamental form, the
//! mean curvature covector and scalars, and the Christoffel symbols. The
//! ambient complex structure compatible with ω₁ − ω₂ is
//! J′(v, w) = (J₀v, −J₀w) with J₀ rotation by +π/2; under it the graph of a
//! unit-determinant map is exactly Lagrangian, which is what makes the raw
//! second fundamental form fully symmetric up to discretization error.
//!
//! The raw tensor ⟨(∂ᵢ∂ⱼF)^⊥, J′F_*∂ₖ⟩ is symmetrized over all indices; the
//! pre-symmetrization defect is recorded as a diagnostic rather than treated
//! as an error, since differencing breaks exact symmetry at O(h⁴).

use rayon::prelude::*;

use crate::grid::{self, exact_sum, ScalarField, VectorField};
use crate::tensoralg::{self, CurvatureScalars, Metric2, SymTensor3};
use crate::torusmap::{MatrixField, TorusMap};
use crate::Result;

/// Christoffel symbols Γᵏᵢⱼ at one node; `[k][m]` with m indexing the
/// symmetric pair (11), (12), (22). Γᵏᵢⱼ = Γᵏⱼᵢ holds structurally.
#[derive(Debug, Clone, Copy, Default)]
pub struct Christoffel {
    pub g: [[f64; 3]; 2],
}

impl Christoffel {
    /// Γᵏᵢⱼ with 0-based indices.
    #[inline]
    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.g[k][i + j]
    }
}

/// One flow slice's differential geometry, sampled per node.
pub struct GeometryCache {
    n: usize,
    /// Df per node (the Jacobian actually used to build the metric).
    pub jac: MatrixField,
    pub metric: Vec<Metric2>,
    pub eta: ScalarField,
    pub sqrt_det_g: ScalarField,
    /// Symmetrized second fundamental form.
    pub h: Vec<SymTensor3>,
    /// Mean curvature covector H_k as a 2-component field.
    pub hcov: VectorField,
    pub a2: ScalarField,
    pub h2: ScalarField,
    pub cross: ScalarField,
    pub gamma: Vec<Christoffel>,
    /// Second derivatives of the displacement: [u¹ₓₓ, u¹ₓᵧ, u¹ᵧᵧ, u²ₓₓ, u²ₓᵧ, u²ᵧᵧ].
    d2u: [ScalarField; 6],
    /// Max over nodes of the pre-symmetrization defect of h.
    pub sym_defect: f64,
    pub min_eta: f64,
    pub max_eta: f64,
    pub min_det_g: f64,
}

impl GeometryCache {
    /// Build from the map's finite-difference Jacobian.
    pub fn build(map: &TorusMap) -> Result<Self> {
        let jac = map.jacobian();
        Self::build_with_jacobian(map, jac)
    }

    /// Build with a caller-supplied Jacobian (e.g. the analytic chain-rule
    /// Jacobian of a shear composition); second derivatives of the
    /// displacement are always taken by differencing.
    pub fn build_with_jacobian(map: &TorusMap, jac: MatrixField) -> Result<Self> {
        let n = map.n();
        assert_eq!(jac.n(), n);

        // Second derivatives of u; the mixed partial differentiates ∂x first.
        let u = map.disp();
        let mut tmp = ScalarField::zeros(n);
        let mut d2u = [
            ScalarField::zeros(n),
            ScalarField::zeros(n),
            ScalarField::zeros(n),
            ScalarField::zeros(n),
            ScalarField::zeros(n),
            ScalarField::zeros(n),
        ];
        grid::deriv2_xx(&u.x, &mut d2u[0]);
        grid::deriv_x(&u.x, &mut tmp);
        grid::deriv_y(&tmp, &mut d2u[1]);
        grid::deriv2_yy(&u.x, &mut d2u[2]);
        grid::deriv2_xx(&u.y, &mut d2u[3]);
        grid::deriv_x(&u.y, &mut tmp);
        grid::deriv_y(&tmp, &mut d2u[4]);
        grid::deriv2_yy(&u.y, &mut d2u[5]);

        let size = n * n;
        let mut metric = Vec::with_capacity(size);
        for df in jac.as_slice() {
            metric.push(induced_metric(*df)?);
        }

        // Curvature node by node.
        let per_node: Vec<(f64, f64, SymTensor3, [f64; 2], CurvatureScalars, f64)> = (0..size)
            .into_par_iter()
            .map(|idx| {
                let g = &metric[idx];
                let df = jac.as_slice()[idx];
                let sdet = g.det().sqrt();
                let eta_v = 2.0 / sdet;
                let w11 = [d2u[0].as_slice()[idx], d2u[3].as_slice()[idx]];
                let w12 = [d2u[1].as_slice()[idx], d2u[4].as_slice()[idx]];
                let w22 = [d2u[2].as_slice()[idx], d2u[5].as_slice()[idx]];
                let (hsym, defect) = second_fundamental_form(df, [w11, w12, w22], g);
                let (scal, hk) = tensoralg::norms(&hsym, g);
                (eta_v, sdet, hsym, hk.0, scal, defect)
            })
            .collect();

        let mut eta = ScalarField::zeros(n);
        let mut sqrt_det_g = ScalarField::zeros(n);
        let mut h = vec![SymTensor3::zero(); size];
        let mut hcov = VectorField::zeros(n);
        let mut a2 = ScalarField::zeros(n);
        let mut h2 = ScalarField::zeros(n);
        let mut cross = ScalarField::zeros(n);
        let mut sym_defect = 0.0f64;
        for (idx, (eta_v, sdet, hsym, hk, scal, defect)) in per_node.into_iter().enumerate() {
            eta.as_mut_slice()[idx] = eta_v;
            sqrt_det_g.as_mut_slice()[idx] = sdet;
            h[idx] = hsym;
            hcov.x.as_mut_slice()[idx] = hk[0];
            hcov.y.as_mut_slice()[idx] = hk[1];
            a2.as_mut_slice()[idx] = scal.a2;
            h2.as_mut_slice()[idx] = scal.h2;
            cross.as_mut_slice()[idx] = scal.cross;
            sym_defect = sym_defect.max(defect);
        }

        // Christoffels from differenced metric component fields.
        let mut g11 = ScalarField::zeros(n);
        let mut g12 = ScalarField::zeros(n);
        let mut g22 = ScalarField::zeros(n);
        for (idx, g) in metric.iter().enumerate() {
            let (a, b, c) = g.components();
            g11.as_mut_slice()[idx] = a;
            g12.as_mut_slice()[idx] = b;
            g22.as_mut_slice()[idx] = c;
        }
        let gamma = christoffel_field(&metric, &g11, &g12, &g22);

        let min_eta = eta.min();
        let max_eta = eta.max();
        let min_det_g = metric.iter().fold(f64::INFINITY, |m, g| m.min(g.det()));

        Ok(Self {
            n,
            jac,
            metric,
            eta,
            sqrt_det_g,
            h,
            hcov,
            a2,
            h2,
            cross,
            gamma,
            d2u,
            sym_defect,
            min_eta,
            max_eta,
            min_det_g,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether det g stayed in the range implied by area preservation
    /// (det g ≥ 4 up to tolerance). A violation flags broken initial data or
    /// accumulated drift; it is reported, not fatal.
    pub fn area_preservation_ok(&self) -> bool {
        self.min_det_g >= 4.0 - 1e-6
    }

    /// Second derivatives ∂ᵢ∂ⱼu at a node: [u¹ᵢⱼ, u²ᵢⱼ] for m over the
    /// pairs (11), (12), (22).
    pub fn d2u_at(&self, idx: usize, m: usize) -> [f64; 2] {
        [self.d2u[m].as_slice()[idx], self.d2u[3 + m].as_slice()[idx]]
    }

    /// Tangent vectors F_*∂₁, F_*∂₂ of the graph lift at a node.
    #[inline]
    pub fn tangents(&self, idx: usize) -> [[f64; 4]; 2] {
        let df = self.jac.as_slice()[idx];
        [
            [1.0, 0.0, df[0][0], df[1][0]],
            [0.0, 1.0, df[0][1], df[1][1]],
        ]
    }

    /// The ambient mean curvature vector H_vec = gᵏˡHₖ·J′F_*∂ₗ at a node.
    pub fn mean_curvature_vector(&self, idx: usize) -> [f64; 4] {
        let g = &self.metric[idx];
        let hk = [self.hcov.x.as_slice()[idx], self.hcov.y.as_slice()[idx]];
        let hup = g.raise(hk);
        let [t1, t2] = self.tangents(idx);
        let j1 = j_prime(t1);
        let j2 = j_prime(t2);
        let mut v = [0.0; 4];
        for s in 0..4 {
            v[s] = hup[0] * j1[s] + hup[1] * j2[s];
        }
        v
    }

    /// sup over nodes of |H|.
    pub fn sup_h(&self) -> f64 {
        self.h2.max().max(0.0).sqrt()
    }
}

/// Induced metric of the graph: g = I + DfᵀDf. Always SPD.
pub fn induced_metric(df: [[f64; 2]; 2]) -> Result<Metric2> {
    let g11 = 1.0 + df[0][0] * df[0][0] + df[1][0] * df[1][0];
    let g12 = df[0][0] * df[0][1] + df[1][0] * df[1][1];
    let g22 = 1.0 + df[0][1] * df[0][1] + df[1][1] * df[1][1];
    Metric2::new(g11, g12, g22)
}

/// η = 2/√det g: the ambient Kähler form restricted to the graph over its
/// area element, i.e. twice the Jacobian of the projection to the first
/// factor.
pub fn eta_of_metric(g: &Metric2) -> f64 {
    2.0 / g.det().sqrt()
}

/// Ambient complex structure for ω₁ − ω₂: J′(v, w) = (J₀v, −J₀w).
#[inline]
pub fn j_prime(t: [f64; 4]) -> [f64; 4] {
    [-t[1], t[0], t[3], -t[2]]
}

#[inline]
fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Second fundamental form at a node from the Jacobian and the second
/// derivatives of the displacement, fully symmetrized; returns the tensor
/// and the pre-symmetrization defect.
///
/// With F(x) = (x, f(x)) lifted to flat R⁴, ∂ᵢ∂ⱼF = (0, ∂ᵢ∂ⱼu) and
/// hᵢⱼₖ = ⟨(∂ᵢ∂ⱼF)^⊥, J′F_*∂ₖ⟩, ^⊥ removing the g-tangential part.
pub fn second_fundamental_form(
    df: [[f64; 2]; 2],
    d2u: [[f64; 2]; 3],
    g: &Metric2,
) -> (SymTensor3, f64) {
    let t1 = [1.0, 0.0, df[0][0], df[1][0]];
    let t2 = [0.0, 1.0, df[0][1], df[1][1]];
    let j1 = j_prime(t1);
    let j2 = j_prime(t2);

    // raw[m][k] for m over (11), (12), (22) and k over the two J′-directions.
    let mut raw = [[0.0f64; 2]; 3];
    for (m, w2) in d2u.iter().enumerate() {
        let w = [0.0, 0.0, w2[0], w2[1]];
        let coef = g.raise([dot4(w, t1), dot4(w, t2)]);
        let mut wp = w;
        for s in 0..4 {
            wp[s] -= coef[0] * t1[s] + coef[1] * t2[s];
        }
        raw[m][0] = dot4(wp, j1);
        raw[m][1] = dot4(wp, j2);
    }

    // Full symmetry couples the pair index with k: the triple (1,1,2)
    // appears once as raw (11)|k=2 and twice as raw (12)|k=1.
    let h112 = (raw[0][1] + 2.0 * raw[1][0]) / 3.0;
    let h122 = (raw[2][0] + 2.0 * raw[1][1]) / 3.0;
    let defect = (raw[0][1] - raw[1][0]).abs().max((raw[2][0] - raw[1][1]).abs());
    (SymTensor3::new(raw[0][0], h112, h122, raw[2][1]), defect)
}

/// Christoffel symbols Γᵏᵢⱼ = ½gᵏˡ(∂ᵢgⱼₗ + ∂ⱼgᵢₗ − ∂ₗgᵢⱼ) from the
/// differenced metric component fields.
fn christoffel_field(
    metric: &[Metric2],
    g11: &ScalarField,
    g12: &ScalarField,
    g22: &ScalarField,
) -> Vec<Christoffel> {
    let n = g11.n();
    let mut d = Vec::new();
    for src in [g11, g12, g22] {
        let mut dx = ScalarField::zeros(n);
        let mut dy = ScalarField::zeros(n);
        grid::deriv_x(src, &mut dx);
        grid::deriv_y(src, &mut dy);
        d.push([dx, dy]);
    }
    // ∂_dir g_{il} at a node; the component field index is i + l.
    let dg = move |i: usize, l: usize, dir: usize, idx: usize| d[i + l][dir].as_slice()[idx];

    (0..metric.len())
        .into_par_iter()
        .map(|idx| {
            let g = &metric[idx];
            let mut ch = Christoffel::default();
            for (m, (i, j)) in [(0usize, 0usize), (0, 1), (1, 1)].iter().copied().enumerate() {
                let mut bracket = [0.0f64; 2];
                for (l, br) in bracket.iter_mut().enumerate() {
                    *br = dg(j, l, i, idx) + dg(i, l, j, idx) - dg(i, j, l, idx);
                }
                let raised = g.raise(bracket);
                ch.g[0][m] = 0.5 * raised[0];
                ch.g[1][m] = 0.5 * raised[1];
            }
            ch
        })
        .collect()
}

/// Laplace–Beltrami in divergence form,
/// Δφ = (1/√det g) ∂ᵢ(√det g · gⁱʲ ∂ⱼφ), with 4th-order stencils.
pub fn laplace_beltrami(phi: &ScalarField, geom: &GeometryCache) -> ScalarField {
    let n = phi.n();
    assert_eq!(n, geom.n());
    let mut px = ScalarField::zeros(n);
    let mut py = ScalarField::zeros(n);
    grid::deriv_x(phi, &mut px);
    grid::deriv_y(phi, &mut py);
    let mut w1 = ScalarField::zeros(n);
    let mut w2 = ScalarField::zeros(n);
    let metric = &geom.metric;
    let sdet = geom.sqrt_det_g.as_slice();
    let (w1s, w2s) = (w1.as_mut_slice(), w2.as_mut_slice());
    w1s.par_iter_mut()
        .zip(w2s.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (a, b))| {
            let (i11, i12, i22) = metric[idx].inverse();
            let gx = px.as_slice()[idx];
            let gy = py.as_slice()[idx];
            *a = sdet[idx] * (i11 * gx + i12 * gy);
            *b = sdet[idx] * (i12 * gx + i22 * gy);
        });
    let mut dw1 = ScalarField::zeros(n);
    let mut dw2 = ScalarField::zeros(n);
    grid::deriv_x(&w1, &mut dw1);
    grid::deriv_y(&w2, &mut dw2);
    let mut out = ScalarField::zeros(n);
    out.as_mut_slice()
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, o)| {
            *o = (dw1.as_slice()[idx] + dw2.as_slice()[idx]) / sdet[idx];
        });
    out
}

/// |∇H|² with ∇ᵢHₖ = ∂ᵢHₖ − ΓˡᵢₖHₗ, contracted with g on both indices
/// (evaluated in the orthonormal frame, hence nonnegative).
#[allow(clippy::needless_range_loop)]
pub fn covariant_grad_h_norm2(geom: &GeometryCache) -> ScalarField {
    let n = geom.n();
    let mut dh = [
        ScalarField::zeros(n),
        ScalarField::zeros(n),
        ScalarField::zeros(n),
        ScalarField::zeros(n),
    ];
    grid::deriv_x(&geom.hcov.x, &mut dh[0]); // ∂₁H₁
    grid::deriv_y(&geom.hcov.x, &mut dh[1]); // ∂₂H₁
    grid::deriv_x(&geom.hcov.y, &mut dh[2]); // ∂₁H₂
    grid::deriv_y(&geom.hcov.y, &mut dh[3]); // ∂₂H₂
    let mut out = ScalarField::zeros(n);
    out.as_mut_slice()
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, o)| {
            let g = &geom.metric[idx];
            let ch = &geom.gamma[idx];
            let hk = [geom.hcov.x.as_slice()[idx], geom.hcov.y.as_slice()[idx]];
            // (∇H)_{ik}, i rows, k columns.
            let mut nabla = [
                [dh[0].as_slice()[idx], dh[2].as_slice()[idx]],
                [dh[1].as_slice()[idx], dh[3].as_slice()[idx]],
            ];
            for i in 0..2 {
                for k in 0..2 {
                    for (l, &hl) in hk.iter().enumerate() {
                        nabla[i][k] -= ch.at(l, i, k) * hl;
                    }
                }
            }
            let (r1, r2) = frame_rows(g);
            let mut z2 = 0.0;
            for p in [r1, r2] {
                for q in [r1, r2] {
                    let mut z = 0.0;
                    for i in 0..2 {
                        for k in 0..2 {
                            z += p[i] * q[k] * nabla[i][k];
                        }
                    }
                    z2 += z * z;
                }
            }
            *o = z2;
        });
    out
}

// Rows of the covector-orthonormalizing factor U with UᵀU = g⁻¹.
fn frame_rows(g: &Metric2) -> ([f64; 2], [f64; 2]) {
    let (a, b, d) = g.inverse();
    let u11 = a.sqrt();
    let u12 = b / u11;
    let u22 = (d - b * b / a).sqrt();
    ([u11, u12], [0.0, u22])
}

/// ∫_Σ φ dμ = Σ_nodes φ·√det g·h² (trapezoidal = exact midpoint on the
/// periodic uniform grid; spectrally accurate for smooth integrands). The
/// per-node products are summed exactly, so the value is independent of
/// node order and of the worker count.
pub fn integrate(phi: &ScalarField, geom: &GeometryCache) -> f64 {
    assert_eq!(phi.n(), geom.n());
    let h2 = phi.spacing() * phi.spacing();
    let s = exact_sum(
        phi.as_slice()
            .iter()
            .zip(geom.sqrt_det_g.as_slice())
            .map(|(p, s)| p * s),
    );
    s * h2
}

/// Surface area ∫ dμ.
pub fn area(geom: &GeometryCache) -> f64 {
    let h2 = geom.sqrt_det_g.spacing() * geom.sqrt_det_g.spacing();
    exact_sum(geom.sqrt_det_g.as_slice().iter().copied()) * h2
}
