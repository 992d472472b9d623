//! Periodic N×N grids on the unit square: scalar and 2-vector fields,
//! 4th-order centered difference stencils, and exact (order-independent)
//! summation for quadrature and diagnostics.
//!
//! Index convention: `idx(i, j) = j*n + i`, with `i` the x-index (contiguous)
//! and `j` the y-index; node (i, j) samples the point (i/n, j/n). All index
//! arithmetic is modulo n on both axes.

use rayon::prelude::*;

/// Grid resolutions must be even and at least 8 (stencil width 5 plus
/// headroom for the refinement studies).
pub fn validate_resolution(n: usize) -> crate::Result<()> {
    if n >= 8 && n.is_multiple_of(2) {
        Ok(())
    } else {
        Err(crate::Error::BadResolution(n))
    }
}

/// Periodic scalar samples on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    v: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 5, "grid too small for the 5-point stencils");
        Self { n, v: vec![0.0; n * n] }
    }

    /// Sample `f(x, y)` at the grid nodes (i/n, j/n).
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let mut out = Self::zeros(n);
        let h = 1.0 / n as f64;
        out.v.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            let y = j as f64 * h;
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = f(i as f64 * h, y);
            }
        });
        out
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing h = 1/n.
    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        j * self.n + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.v[self.idx(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.v[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.v
    }

    pub fn fill(&mut self, value: f64) {
        self.v.iter_mut().for_each(|x| *x = value);
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.v.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn max(&self) -> f64 {
        self.v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
    }

    /// Mean over nodes (exact summation, divided once).
    pub fn mean(&self) -> f64 {
        exact_sum(self.v.iter().copied()) / (self.n * self.n) as f64
    }

    /// Cyclic translation by (di, dj) nodes: out(i, j) = self(i - di, j - dj).
    pub fn translated(&self, di: usize, dj: usize) -> ScalarField {
        let n = self.n;
        let mut out = ScalarField::zeros(n);
        for j in 0..n {
            for i in 0..n {
                *out.at_mut(i, j) = self.at((i + n - di % n) % n, (j + n - dj % n) % n);
            }
        }
        out
    }
}

/// Periodic 2-vector samples, stored as two scalar components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        Self { x: ScalarField::zeros(n), y: ScalarField::zeros(n) }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> [f64; 2] + Sync) -> Self {
        Self {
            x: ScalarField::from_fn(n, |x, y| f(x, y)[0]),
            y: ScalarField::from_fn(n, |x, y| f(x, y)[1]),
        }
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x.at(i, j), self.y.at(i, j)]
    }

    /// self += a * other, componentwise.
    pub fn scaled_add(&mut self, a: f64, other: &VectorField) {
        for (dst, src) in [(&mut self.x, &other.x), (&mut self.y, &other.y)] {
            for (d, s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
                *d += a * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }
}

#[inline]
fn pm(i: usize, d: isize, n: usize) -> usize {
    (i as isize + d).rem_euclid(n as isize) as usize
}

/// ∂/∂x by the 4th-order centered stencil (f₋₂ − 8f₋₁ + 8f₊₁ − f₊₂)/(12h).
///
/// The stencil loops run over exact-length zipped subslices so the interior
/// vectorizes; only the four wrap columns per row take modular indexing.
pub fn deriv_x(src: &ScalarField, out: &mut ScalarField) {
    let n = src.n();
    debug_assert_eq!(out.n(), n);
    let c = n as f64 / 12.0; // 1/(12h)
    let v = src.as_slice();
    for (j, orow) in out.as_mut_slice().chunks_mut(n).enumerate() {
        let row = &v[j * n..(j + 1) * n];
        let it = orow[2..n - 2]
            .iter_mut()
            .zip(&row[..n - 4])
            .zip(&row[1..n - 3])
            .zip(&row[3..n - 1])
            .zip(&row[4..]);
        for ((((dst, &m2), &m1), &p1), &p2) in it {
            *dst = c * (m2 - 8.0 * m1 + 8.0 * p1 - p2);
        }
        for i in [0, 1, n - 2, n - 1] {
            orow[i] = c
                * (row[pm(i, -2, n)] - 8.0 * row[pm(i, -1, n)] + 8.0 * row[pm(i, 1, n)]
                    - row[pm(i, 2, n)]);
        }
    }
}

/// ∂/∂y, same stencil along the j axis (whole rows, no wrap in the inner
/// loop).
pub fn deriv_y(src: &ScalarField, out: &mut ScalarField) {
    let n = src.n();
    debug_assert_eq!(out.n(), n);
    let c = n as f64 / 12.0;
    let v = src.as_slice();
    for (j, orow) in out.as_mut_slice().chunks_mut(n).enumerate() {
        let rm2 = &v[pm(j, -2, n) * n..pm(j, -2, n) * n + n];
        let rm1 = &v[pm(j, -1, n) * n..pm(j, -1, n) * n + n];
        let rp1 = &v[pm(j, 1, n) * n..pm(j, 1, n) * n + n];
        let rp2 = &v[pm(j, 2, n) * n..pm(j, 2, n) * n + n];
        let it = orow.iter_mut().zip(rm2).zip(rm1).zip(rp1).zip(rp2);
        for ((((dst, &m2), &m1), &p1), &p2) in it {
            *dst = c * (m2 - 8.0 * m1 + 8.0 * p1 - p2);
        }
    }
}

/// ∂²/∂x² by the 4th-order stencil (−f₋₂ + 16f₋₁ − 30f₀ + 16f₊₁ − f₊₂)/(12h²).
pub fn deriv2_xx(src: &ScalarField, out: &mut ScalarField) {
    let n = src.n();
    debug_assert_eq!(out.n(), n);
    let c = (n * n) as f64 / 12.0;
    let v = src.as_slice();
    for (j, orow) in out.as_mut_slice().chunks_mut(n).enumerate() {
        let row = &v[j * n..(j + 1) * n];
        let it = orow[2..n - 2]
            .iter_mut()
            .zip(&row[..n - 4])
            .zip(&row[1..n - 3])
            .zip(&row[2..n - 2])
            .zip(&row[3..n - 1])
            .zip(&row[4..]);
        for (((((dst, &m2), &m1), &z), &p1), &p2) in it {
            *dst = c * (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2);
        }
        for i in [0, 1, n - 2, n - 1] {
            orow[i] = c
                * (-row[pm(i, -2, n)] + 16.0 * row[pm(i, -1, n)] - 30.0 * row[i]
                    + 16.0 * row[pm(i, 1, n)]
                    - row[pm(i, 2, n)]);
        }
    }
}

/// ∂²/∂y².
pub fn deriv2_yy(src: &ScalarField, out: &mut ScalarField) {
    let n = src.n();
    debug_assert_eq!(out.n(), n);
    let c = (n * n) as f64 / 12.0;
    let v = src.as_slice();
    for (j, orow) in out.as_mut_slice().chunks_mut(n).enumerate() {
        let rm2 = &v[pm(j, -2, n) * n..pm(j, -2, n) * n + n];
        let rm1 = &v[pm(j, -1, n) * n..pm(j, -1, n) * n + n];
        let rz = &v[j * n..(j + 1) * n];
        let rp1 = &v[pm(j, 1, n) * n..pm(j, 1, n) * n + n];
        let rp2 = &v[pm(j, 2, n) * n..pm(j, 2, n) * n + n];
        let it = orow.iter_mut().zip(rm2).zip(rm1).zip(rz).zip(rp1).zip(rp2);
        for (((((dst, &m2), &m1), &z), &p1), &p2) in it {
            *dst = c * (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2);
        }
    }
}

/// Fused ∂/∂x and ∂²/∂x² in one sweep (shared loads).
pub fn deriv_x_with_xx(src: &ScalarField, d1: &mut ScalarField, d2: &mut ScalarField) {
    let n = src.n();
    debug_assert!(d1.n() == n && d2.n() == n);
    let c1 = n as f64 / 12.0;
    let c2 = (n * n) as f64 / 12.0;
    let v = src.as_slice();
    let (d1s, d2s) = (d1.as_mut_slice(), d2.as_mut_slice());
    for j in 0..n {
        let row = &v[j * n..(j + 1) * n];
        let o1 = &mut d1s[j * n..(j + 1) * n];
        let o2 = &mut d2s[j * n..(j + 1) * n];
        let it = o1[2..n - 2]
            .iter_mut()
            .zip(o2[2..n - 2].iter_mut())
            .zip(&row[..n - 4])
            .zip(&row[1..n - 3])
            .zip(&row[2..n - 2])
            .zip(&row[3..n - 1])
            .zip(&row[4..]);
        for ((((((a, b), &m2), &m1), &z), &p1), &p2) in it {
            *a = c1 * (m2 - 8.0 * m1 + 8.0 * p1 - p2);
            *b = c2 * (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2);
        }
        for i in [0, 1, n - 2, n - 1] {
            let (m2, m1, p1, p2) = (
                row[pm(i, -2, n)],
                row[pm(i, -1, n)],
                row[pm(i, 1, n)],
                row[pm(i, 2, n)],
            );
            o1[i] = c1 * (m2 - 8.0 * m1 + 8.0 * p1 - p2);
            o2[i] = c2 * (-m2 + 16.0 * m1 - 30.0 * row[i] + 16.0 * p1 - p2);
        }
    }
}

/// Fused ∂/∂y and ∂²/∂y².
pub fn deriv_y_with_yy(src: &ScalarField, d1: &mut ScalarField, d2: &mut ScalarField) {
    let n = src.n();
    debug_assert!(d1.n() == n && d2.n() == n);
    let c1 = n as f64 / 12.0;
    let c2 = (n * n) as f64 / 12.0;
    let v = src.as_slice();
    let (d1s, d2s) = (d1.as_mut_slice(), d2.as_mut_slice());
    for j in 0..n {
        let rm2 = &v[pm(j, -2, n) * n..pm(j, -2, n) * n + n];
        let rm1 = &v[pm(j, -1, n) * n..pm(j, -1, n) * n + n];
        let rz = &v[j * n..(j + 1) * n];
        let rp1 = &v[pm(j, 1, n) * n..pm(j, 1, n) * n + n];
        let rp2 = &v[pm(j, 2, n) * n..pm(j, 2, n) * n + n];
        let o1 = &mut d1s[j * n..(j + 1) * n];
        let o2 = &mut d2s[j * n..(j + 1) * n];
        let it = o1
            .iter_mut()
            .zip(o2.iter_mut())
            .zip(rm2)
            .zip(rm1)
            .zip(rz)
            .zip(rp1)
            .zip(rp2);
        for ((((((a, b), &m2), &m1), &z), &p1), &p2) in it {
            *a = c1 * (m2 - 8.0 * m1 + 8.0 * p1 - p2);
            *b = c2 * (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2);
        }
    }
}

/// Exactly-rounded, order-independent sum of f64 values.
///
/// The running sum is held in a fixed-point superaccumulator (signed 64-bit
/// chunks, 32 bits of value per chunk, spanning the full f64 exponent range),
/// so accumulation is exact and the result does not depend on the order in
/// which values are added. Extraction loses at most ~1 ulp.
#[derive(Clone)]
pub struct ExactSum {
    chunks: [i64; CHUNKS],
    pending: u32,
    poisoned: bool,
}

const CHUNKS: usize = 67;
const RENORM_LIMIT: u32 = 1 << 30;

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self { chunks: [0; CHUNKS], pending: 0, poisoned: false }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let bits = x.to_bits();
        let be = ((bits >> 52) & 0x7ff) as i32;
        if be == 0x7ff {
            // Inf or NaN: the sum is no longer meaningful.
            self.poisoned = true;
            return;
        }
        let mantissa = bits & ((1u64 << 52) - 1);
        let (m, e) = if be == 0 {
            (mantissa, 0) // subnormal, scale 2^-1074
        } else {
            (mantissa | (1u64 << 52), be - 1)
        };
        if m == 0 {
            return;
        }
        let c = (e >> 5) as usize;
        let r = e & 31;
        let wide = (m as u128) << r;
        let p0 = (wide & 0xffff_ffff) as i64;
        let p1 = ((wide >> 32) & 0xffff_ffff) as i64;
        let p2 = ((wide >> 64) & 0xffff_ffff) as i64;
        if bits >> 63 == 0 {
            self.chunks[c] += p0;
            self.chunks[c + 1] += p1;
            self.chunks[c + 2] += p2;
        } else {
            self.chunks[c] -= p0;
            self.chunks[c + 1] -= p1;
            self.chunks[c + 2] -= p2;
        }
        self.pending += 1;
        if self.pending >= RENORM_LIMIT {
            self.renormalize();
        }
    }

    /// Fold another accumulator in; exact, order-independent.
    pub fn merge(&mut self, other: &ExactSum) {
        self.poisoned |= other.poisoned;
        for (a, b) in self.chunks.iter_mut().zip(other.chunks.iter()) {
            *a += b;
        }
        self.pending += 1;
        if self.pending >= RENORM_LIMIT {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        // Chunks below the top end up in [0, 2^32); the top chunk keeps the
        // sign of the whole sum.
        let mut carry = 0i64;
        for c in self.chunks.iter_mut().take(CHUNKS - 1) {
            let t = *c + carry;
            let low = t & 0xffff_ffff;
            carry = (t - low) >> 32;
            *c = low;
        }
        self.chunks[CHUNKS - 1] += carry;
        self.pending = 0;
    }

    /// Round the exact accumulated value to f64.
    pub fn value(&self) -> f64 {
        if self.poisoned {
            return f64::NAN;
        }
        let mut acc = self.clone();
        acc.renormalize();
        // Sign-magnitude form: locate the top nonzero chunk; if the
        // two's-complement value is negative, negate and remember the sign.
        let negative = acc.chunks.iter().rev().find(|&&c| c != 0).is_some_and(|&c| c < 0);
        if negative {
            for c in acc.chunks.iter_mut() {
                *c = -*c;
            }
            acc.renormalize();
        }
        let mut total = 0.0f64;
        for i in (0..CHUNKS).rev() {
            if acc.chunks[i] != 0 {
                let e = 32 * i as i32 - 1074;
                let e1 = e.min(1023);
                total += acc.chunks[i] as f64 * pow2(e1) * pow2(e - e1);
            }
        }
        if negative {
            -total
        } else {
            total
        }
    }
}

/// Exact power of two from the bit pattern, valid for e in [−1074, 1023].
fn pow2(e: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&e));
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// One-shot exact sum.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
