//! Area-preserving maps of the flat torus T² = R²/Z².
//!
//! A map is stored as f(x) = Lx + u(x) with an integer linear part L of
//! determinant one (the homotopy class, never mutated by the flow) and a
//! smooth periodic displacement u sampled on the grid. The displacement is
//! kept unwrapped (real-valued, not reduced mod 1) so differencing never
//! crosses a branch cut; only evaluation of f as a torus point wraps.
//!
//! Exact initial data comes from compositions of shears
//! (x, y) ↦ (x, y + aφ(x)) and (x, y) ↦ (x + aφ(y), y) with trigonometric-
//! polynomial profiles: each factor has unit Jacobian determinant
//! identically, so the composition is an exact symplectomorphism and any
//! measured det-drift is pure discretization error.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{self, ScalarField, VectorField};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Magic header of map snapshot files.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"LAGFLOW1";

/// Finite trigonometric polynomial
/// φ(s) = c₀ + Σₘ (aₘ cos(2πms) + bₘ sin(2πms)), m = 1..
///
/// Exactly periodic and exactly smooth; the analytic derivatives below feed
/// the closed-form oracles.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct TrigPoly {
    #[serde(default, rename = "const")]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPoly {
    /// The single harmonic a·sin(2πks).
    pub fn sin_wave(k: usize, amp: f64) -> Self {
        let mut sin = vec![0.0; k];
        sin[k - 1] = amp;
        Self { constant: 0.0, cos: Vec::new(), sin }
    }

    /// The single harmonic a·cos(2πks).
    pub fn cos_wave(k: usize, amp: f64) -> Self {
        let mut cos = vec![0.0; k];
        cos[k - 1] = amp;
        Self { constant: 0.0, cos, sin: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut v = self.constant;
        for (m, &a) in self.cos.iter().enumerate() {
            v += a * (TAU * (m + 1) as f64 * s).cos();
        }
        for (m, &b) in self.sin.iter().enumerate() {
            v += b * (TAU * (m + 1) as f64 * s).sin();
        }
        v
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for (m, &a) in self.cos.iter().enumerate() {
            let w = TAU * (m + 1) as f64;
            v -= a * w * (w * s).sin();
        }
        for (m, &b) in self.sin.iter().enumerate() {
            let w = TAU * (m + 1) as f64;
            v += b * w * (w * s).cos();
        }
        v
    }

    pub fn deriv2(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for (m, &a) in self.cos.iter().enumerate() {
            let w = TAU * (m + 1) as f64;
            v -= a * w * w * (w * s).cos();
        }
        for (m, &b) in self.sin.iter().enumerate() {
            let w = TAU * (m + 1) as f64;
            v -= b * w * w * (w * s).sin();
        }
        v
    }

    pub fn deriv3(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for (m, &a) in self.cos.iter().enumerate() {
            let w = TAU * (m + 1) as f64;
            v += a * w * w * w * (w * s).sin();
        }
        for (m, &b) in self.sin.iter().enumerate() {
            let w = TAU * (m + 1) as f64;
            v -= b * w * w * w * (w * s).cos();
        }
        v
    }
}

/// Which coordinate a shear displaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShearAxis {
    /// (x, y) ↦ (x + aφ(y), y)
    X,
    /// (x, y) ↦ (x, y + aφ(x))
    Y,
}

/// One exactly area-preserving shear factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Shear {
    pub axis: ShearAxis,
    pub amplitude: f64,
    pub profile: TrigPoly,
}

impl Shear {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        match self.axis {
            ShearAxis::X => [p[0] + self.amplitude * self.profile.eval(p[1]), p[1]],
            ShearAxis::Y => [p[0], p[1] + self.amplitude * self.profile.eval(p[0])],
        }
    }

    /// Jacobian matrix at p; unit determinant by construction.
    pub fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        match self.axis {
            ShearAxis::X => [[1.0, self.amplitude * self.profile.deriv(p[1])], [0.0, 1.0]],
            ShearAxis::Y => [[1.0, 0.0], [self.amplitude * self.profile.deriv(p[0]), 1.0]],
        }
    }
}

/// An ordered list of shears; the map is Sₖ ∘ … ∘ S₁.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShearSpec {
    pub shears: Vec<Shear>,
}

impl ShearSpec {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        self.shears.iter().fold(p, |q, s| s.apply(q))
    }

    /// Chain-rule Jacobian through the intermediate points.
    pub fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let mut q = p;
        let mut jac = [[1.0, 0.0], [0.0, 1.0]];
        for s in &self.shears {
            jac = mat_mul(s.jacobian(q), jac);
            q = s.apply(q);
        }
        jac
    }

    /// Analytic Jacobian sampled at the grid nodes.
    pub fn jacobian_field(&self, n: usize) -> MatrixField {
        let h = 1.0 / n as f64;
        let mut m = MatrixField::identity(n);
        m.m.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            let y = j as f64 * h;
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = self.jacobian([i as f64 * h, y]);
            }
        });
        m
    }
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Per-node 2×2 matrices, `[a][i]` = ∂fᵃ/∂xⁱ.
#[derive(Debug, Clone)]
pub struct MatrixField {
    n: usize,
    m: Vec<[[f64; 2]; 2]>,
}

impl MatrixField {
    pub fn identity(n: usize) -> Self {
        Self { n, m: vec![[[1.0, 0.0], [0.0, 1.0]]; n * n] }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [[f64; 2]; 2] {
        self.m[j * self.n + i]
    }

    pub fn as_slice(&self) -> &[[[f64; 2]; 2]] {
        &self.m
    }

    /// Maximum over nodes of |det − 1|: the pullback defect of the ambient
    /// Kähler form on the graph, i.e. the Lagrangian-condition violation.
    pub fn det_drift(&self) -> f64 {
        self.m.iter().fold(0.0f64, |acc, d| {
            acc.max((d[0][0] * d[1][1] - d[0][1] * d[1][0] - 1.0).abs())
        })
    }
}

/// A map f: T² → T² as integer linear part plus periodic displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusMap {
    linear: [[i64; 2]; 2],
    disp: VectorField,
}

impl TorusMap {
    pub fn identity(n: usize) -> Result<Self> {
        grid::validate_resolution(n)?;
        Ok(Self { linear: [[1, 0], [0, 1]], disp: VectorField::zeros(n) })
    }

    /// Purely linear map; L must be integer with det L = 1.
    pub fn from_linear(n: usize, linear: [[i64; 2]; 2]) -> Result<Self> {
        grid::validate_resolution(n)?;
        check_unimodular(linear)?;
        Ok(Self { linear, disp: VectorField::zeros(n) })
    }

    /// Sample a shear composition on the grid. The composition is evaluated
    /// pointwise through the exact factor maps; L is the identity.
    pub fn from_shears(spec: &ShearSpec, n: usize) -> Result<Self> {
        grid::validate_resolution(n)?;
        let disp = VectorField::from_fn(n, |x, y| {
            let q = spec.apply([x, y]);
            [q[0] - x, q[1] - y]
        });
        Ok(Self { linear: [[1, 0], [0, 1]], disp })
    }

    pub fn from_parts(linear: [[i64; 2]; 2], disp: VectorField) -> Result<Self> {
        grid::validate_resolution(disp.n())?;
        check_unimodular(linear)?;
        Ok(Self { linear, disp })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.disp.n()
    }

    pub fn linear(&self) -> [[i64; 2]; 2] {
        self.linear
    }

    pub fn disp(&self) -> &VectorField {
        &self.disp
    }

    pub fn disp_mut(&mut self) -> &mut VectorField {
        &mut self.disp
    }

    /// f at node (i, j), unwrapped (apply mod 1 to land on the torus).
    pub fn value_at(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.n() as f64;
        let x = i as f64 / n;
        let y = j as f64 / n;
        let u = self.disp.at(i, j);
        let l = self.linear;
        [
            l[0][0] as f64 * x + l[0][1] as f64 * y + u[0],
            l[1][0] as f64 * x + l[1][1] as f64 * y + u[1],
        ]
    }

    /// Df = L + Du with Du by 4th-order centered periodic differences.
    pub fn jacobian(&self) -> MatrixField {
        let n = self.n();
        let mut dux_dx = ScalarField::zeros(n);
        let mut dux_dy = ScalarField::zeros(n);
        let mut duy_dx = ScalarField::zeros(n);
        let mut duy_dy = ScalarField::zeros(n);
        grid::deriv_x(&self.disp.x, &mut dux_dx);
        grid::deriv_y(&self.disp.x, &mut dux_dy);
        grid::deriv_x(&self.disp.y, &mut duy_dx);
        grid::deriv_y(&self.disp.y, &mut duy_dy);
        let l = self.linear;
        let mut out = MatrixField::identity(n);
        out.m
            .par_iter_mut()
            .zip(dux_dx.as_slice().par_iter())
            .zip(dux_dy.as_slice().par_iter())
            .zip(duy_dx.as_slice().par_iter())
            .zip(duy_dy.as_slice().par_iter())
            .for_each(|((((m, &xx), &xy), &yx), &yy)| {
                *m = [
                    [l[0][0] as f64 + xx, l[0][1] as f64 + xy],
                    [l[1][0] as f64 + yx, l[1][1] as f64 + yy],
                ];
            });
        out
    }

    /// det-drift of the finite-difference Jacobian.
    pub fn det_drift(&self) -> f64 {
        self.jacobian().det_drift()
    }

    /// Binary snapshot: magic, flow time, n, L, then the n² displacement
    /// pairs row-major. Round-trips bit-exactly.
    pub fn write_snapshot<W: Write>(&self, w: &mut W, t: f64) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&(self.n() as u32).to_le_bytes())?;
        for row in self.linear {
            for e in row {
                w.write_all(&e.to_le_bytes())?;
            }
        }
        let n = self.n();
        for j in 0..n {
            for i in 0..n {
                let u = self.disp.at(i, j);
                w.write_all(&u[0].to_le_bytes())?;
                w.write_all(&u[1].to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a snapshot, returning the map and its flow time.
    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<(Self, f64)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot(format!(
                "bad magic header {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(SNAPSHOT_MAGIC)
            )));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let t = f64::from_le_bytes(b8);
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        grid::validate_resolution(n)?;
        let mut linear = [[0i64; 2]; 2];
        for row in linear.iter_mut() {
            for e in row.iter_mut() {
                r.read_exact(&mut b8)?;
                *e = i64::from_le_bytes(b8);
            }
        }
        check_unimodular(linear)?;
        let mut disp = VectorField::zeros(n);
        for j in 0..n {
            for i in 0..n {
                r.read_exact(&mut b8)?;
                *disp.x.at_mut(i, j) = f64::from_le_bytes(b8);
                r.read_exact(&mut b8)?;
                *disp.y.at_mut(i, j) = f64::from_le_bytes(b8);
            }
        }
        if !(t.is_finite() && disp.is_finite()) {
            return Err(Error::Snapshot("non-finite data".into()));
        }
        Ok((Self { linear, disp }, t))
    }

    pub fn write_snapshot_file(&self, path: &std::path::Path, t: f64) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_snapshot(&mut w, t)?;
        Ok(())
    }

    pub fn read_snapshot_file(path: &std::path::Path) -> Result<(Self, f64)> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_snapshot(&mut r)
    }
}

fn check_unimodular(l: [[i64; 2]; 2]) -> Result<()> {
    let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    if det == 1 {
        Ok(())
    } else {
        Err(Error::Snapshot(format!("linear part must have det 1, got {det}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shear_y(amp: f64) -> Shear {
        Shear { axis: ShearAxis::Y, amplitude: amp, profile: TrigPoly::sin_wave(1, 1.0) }
    }

    fn shear_x(amp: f64) -> Shear {
        Shear { axis: ShearAxis::X, amplitude: amp, profile: TrigPoly::cos_wave(1, 1.0) }
    }

    #[test]
    fn empty_spec_is_identity() {
        let m = TorusMap::from_shears(&ShearSpec::default(), 16).unwrap();
        assert_eq!(m.linear(), [[1, 0], [0, 1]]);
        assert_eq!(m.disp().max_abs(), 0.0);
        assert_eq!(m.det_drift(), 0.0);
    }

    #[test]
    fn single_shear_matches_definition() {
        let n = 32;
        let spec = ShearSpec { shears: vec![shear_y(0.1)] };
        let m = TorusMap::from_shears(&spec, n).unwrap();
        for (i, j) in [(0, 0), (5, 9), (17, 31)] {
            let x = i as f64 / n as f64;
            let u = m.disp().at(i, j);
            assert_eq!(u[0], 0.0);
            assert!((u[1] - 0.1 * (TAU * x).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn composition_has_unit_analytic_determinant() {
        let spec = ShearSpec { shears: vec![shear_y(0.3), shear_x(0.25), shear_y(-0.15)] };
        let jac = spec.jacobian_field(64);
        assert!(jac.det_drift() <= 1e-14);
    }

    #[test]
    fn fd_jacobian_of_identity_is_exact() {
        let m = TorusMap::identity(16).unwrap();
        let jac = m.jacobian();
        for j in 0..16 {
            for i in 0..16 {
                assert_eq!(jac.at(i, j), [[1.0, 0.0], [0.0, 1.0]]);
            }
        }
    }

    #[test]
    fn linear_map_jacobian_is_exact() {
        let m = TorusMap::from_linear(16, [[2, 1], [1, 1]]).unwrap();
        let jac = m.jacobian();
        for j in 0..16 {
            for i in 0..16 {
                assert_eq!(jac.at(i, j), [[2.0, 1.0], [1.0, 1.0]]);
            }
        }
        assert!(TorusMap::from_linear(16, [[2, 0], [0, 1]]).is_err());
    }

    #[test]
    fn fd_jacobian_converges_at_4th_order() {
        let spec = ShearSpec { shears: vec![shear_y(0.1)] };
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let m = TorusMap::from_shears(&spec, n).unwrap();
            let fd = m.jacobian();
            let exact = spec.jacobian_field(n);
            let mut err = 0.0f64;
            for (a, b) in fd.as_slice().iter().zip(exact.as_slice()) {
                for r in 0..2 {
                    for c in 0..2 {
                        err = err.max((a[r][c] - b[r][c]).abs());
                    }
                }
            }
            errs.push(err);
        }
        assert!((errs[0] / errs[1]).log2() >= 3.7, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() >= 3.7, "{errs:?}");
    }

    #[test]
    fn det_drift_refines_at_4th_order() {
        let spec = ShearSpec { shears: vec![shear_y(0.2), shear_x(0.2)] };
        let d64 = TorusMap::from_shears(&spec, 64).unwrap().det_drift();
        let d128 = TorusMap::from_shears(&spec, 128).unwrap().det_drift();
        assert!(d64 / d128 >= 11.0, "ratio {}", d64 / d128);
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let spec = ShearSpec { shears: vec![shear_y(0.17), shear_x(0.05)] };
        let m = TorusMap::from_shears(&spec, 16).unwrap();
        let t = 1.25e-3;
        let mut buf = Vec::new();
        m.write_snapshot(&mut buf, t).unwrap();
        let (m2, t2) = TorusMap::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(t.to_bits(), t2.to_bits());
        assert_eq!(m, m2);

        // Corrupted magic is rejected.
        buf[0] ^= 0xff;
        assert!(TorusMap::read_snapshot(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn trig_poly_derivatives() {
        let p = TrigPoly { constant: 0.3, cos: vec![0.5], sin: vec![0.0, -0.2] };
        let s = 0.137;
        let fd = (p.eval(s + 5e-7) - p.eval(s - 5e-7)) / 1e-6;
        assert!((fd - p.deriv(s)).abs() < 1e-7);
        let fd2 = (p.deriv(s + 5e-7) - p.deriv(s - 5e-7)) / 1e-6;
        assert!((fd2 - p.deriv2(s)).abs() < 1e-6);
        let fd3 = (p.deriv2(s + 5e-7) - p.deriv2(s - 5e-7)) / 1e-6;
        assert!((fd3 - p.deriv3(s)).abs() < 1e-5);
    }
}
