//! Pruned 3D FFTs between a truncation cube `|k_i| <= N` and an `M^3` grid.
//!
//! Real fields are transformed two at a time by packing them as the real and
//! imaginary parts of one complex field. Only the lines that can carry nonzero
//! input (inverse direction) or that are needed in the output (forward
//! direction) are transformed.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{mode_count, project_mode, wavevector, SpectralField, Vec3};
use crate::error::{Error, Result};

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Plans, index tables and scratch for one `(N, M)` pair.
///
/// Methods take `&mut self` for the scratch buffers; use one instance per worker.
pub struct Fft3 {
    n: usize,
    m: usize,
    inv: Arc<dyn Fft<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
    active: Vec<usize>,
    runs: [(usize, usize); 2],
    pos: Vec<usize>,
    neg: Vec<usize>,
    kvec: Vec<[f64; 3]>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl Fft3 {
    /// Requires `m >= 2n + 1` so that every mode of the cube has its own grid
    /// frequency.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        let required = 2 * n + 1;
        if m < required {
            return Err(Error::Aliasing {
                grid: m,
                resolution: n,
                required,
            });
        }
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(m);
        let fwd = planner.plan_fft_forward(m);
        let scratch_len = inv
            .get_inplace_scratch_len()
            .max(fwd.get_inplace_scratch_len());
        let wrap = |c: i32| -> usize {
            if c >= 0 {
                c as usize
            } else {
                (c + m as i32) as usize
            }
        };
        let gidx = |k: [i32; 3]| (wrap(k[0]) * m + wrap(k[1])) * m + wrap(k[2]);
        let count = mode_count(n);
        let mut pos = Vec::with_capacity(count);
        let mut neg = Vec::with_capacity(count);
        let mut kvec = Vec::with_capacity(count);
        for i in 0..count {
            let k = wavevector(i, n);
            pos.push(gidx(k.0));
            neg.push(gidx((-k).0));
            kvec.push(k.as_f64());
        }
        let active = (0..=n).chain(m - n..m).collect();
        Ok(Fft3 {
            n,
            m,
            inv,
            fwd,
            scratch: vec![CZERO; scratch_len],
            tmp: vec![CZERO; m * m * m],
            active,
            runs: [(0, n + 1), (m - n, n)],
            pos,
            neg,
            kvec,
        })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub(crate) fn kvec(&self) -> &[[f64; 3]] {
        &self.kvec
    }

    pub fn new_buffer(&self) -> Vec<Complex64> {
        vec![CZERO; self.len()]
    }

    /// Writes the spectrum of the packed field `a + i b`, where `f(slot)`
    /// returns the coefficients `(a_k, b_k)` of two real fields.
    pub fn scatter(&self, buf: &mut [Complex64], f: impl Fn(usize) -> (Complex64, Complex64)) {
        buf.iter_mut().for_each(|z| *z = CZERO);
        let i1 = Complex64::new(0.0, 1.0);
        for slot in 0..self.pos.len() {
            let (a, b) = f(slot);
            buf[self.pos[slot]] = a + i1 * b;
            buf[self.neg[slot]] = a.conj() + i1 * b.conj();
        }
    }

    /// Unnormalised coefficients `(a_k, b_k)` of the two real fields packed in a
    /// forward-transformed buffer.
    #[inline]
    pub fn gather(&self, buf: &[Complex64], slot: usize) -> (Complex64, Complex64) {
        let p = buf[self.pos[slot]];
        let q = buf[self.neg[slot]].conj();
        let a = (p + q) * 0.5;
        let d = (p - q) * 0.5;
        (a, Complex64::new(d.im, -d.re))
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            for (c, v) in row.iter().enumerate() {
                dst[c * rows + r] = *v;
            }
        }
    }

    /// Spectral to physical, `f(x) = sum_k f_k exp(2 pi i k.x)`.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        let m = self.m;
        let mm = m * m;
        // z lines with (kx, ky) in the cube
        for &ix in &self.active {
            for &(start, len) in &self.runs {
                if len == 0 {
                    continue;
                }
                let lo = (ix * m + start) * m;
                self.inv
                    .process_with_scratch(&mut buf[lo..lo + len * m], &mut self.scratch);
            }
        }
        // y lines for kx in the cube
        for &ix in &self.active {
            let plane = &mut buf[ix * mm..(ix + 1) * mm];
            let tmp = &mut self.tmp[..mm];
            Self::transpose(plane, tmp, m, m);
            self.inv.process_with_scratch(tmp, &mut self.scratch);
            Self::transpose(tmp, plane, m, m);
        }
        // all x lines
        Self::transpose(buf, &mut self.tmp, m, mm);
        self.inv.process_with_scratch(&mut self.tmp, &mut self.scratch);
        Self::transpose(&self.tmp, buf, mm, m);
    }

    /// Physical to spectral (unnormalised, divide by `M^3`); only entries in the
    /// cube are valid afterwards.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        let m = self.m;
        let mm = m * m;
        Self::transpose(buf, &mut self.tmp, m, mm);
        self.fwd.process_with_scratch(&mut self.tmp, &mut self.scratch);
        for &ix in &self.active {
            for r in 0..mm {
                buf[ix * mm + r] = self.tmp[r * m + ix];
            }
        }
        for &ix in &self.active {
            let plane = &mut buf[ix * mm..(ix + 1) * mm];
            let tmp = &mut self.tmp[..mm];
            Self::transpose(plane, tmp, m, m);
            self.fwd.process_with_scratch(tmp, &mut self.scratch);
            for &iy in &self.active {
                for iz in 0..m {
                    plane[iy * m + iz] = tmp[iz * m + iy];
                }
            }
        }
        for &ix in &self.active {
            for &(start, len) in &self.runs {
                if len == 0 {
                    continue;
                }
                let lo = (ix * m + start) * m;
                self.fwd
                    .process_with_scratch(&mut buf[lo..lo + len * m], &mut self.scratch);
            }
        }
    }
}

/// Samples of a real vector field on the uniform grid `x = (i, j, l) / M`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub m: usize,
    /// Component-major samples, each indexed `(i * M + j) * M + l`.
    pub data: [Vec<f64>; 3],
}

impl PhysicalField {
    /// Grid quadrature of `|u(x)|^p` over the unit torus, to the power `1/p`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let len = self.data[0].len() as f64;
        let s: f64 = (0..self.data[0].len())
            .map(|i| {
                let m2 = self.data[0][i].powi(2) + self.data[1][i].powi(2) + self.data[2][i].powi(2);
                m2.powf(p / 2.0)
            })
            .sum();
        (s / len).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |a, &b| a.max(b.abs()))
    }
}

/// Samples `u` on an `m^3` grid; requires `m >= 2N + 1`.
pub fn to_physical(u: &SpectralField, m: usize) -> Result<PhysicalField> {
    let mut plan = Fft3::new(u.resolution(), m)?;
    Ok(to_physical_with(&mut plan, u))
}

pub(crate) fn to_physical_with(plan: &mut Fft3, u: &SpectralField) -> PhysicalField {
    let c = u.coeffs();
    let mut b0 = plan.new_buffer();
    let mut b1 = plan.new_buffer();
    plan.scatter(&mut b0, |i| (c[i][0], c[i][1]));
    plan.scatter(&mut b1, |i| (c[i][2], CZERO));
    plan.inverse(&mut b0);
    plan.inverse(&mut b1);
    PhysicalField {
        m: plan.m,
        data: [
            b0.iter().map(|z| z.re).collect(),
            b0.iter().map(|z| z.im).collect(),
            b1.iter().map(|z| z.re).collect(),
        ],
    }
}

/// Projects grid samples back onto the divergence-free modes `|k_i| <= n`.
pub fn from_physical(p: &PhysicalField, n: usize) -> Result<SpectralField> {
    let mut plan = Fft3::new(n, p.m)?;
    let mut b0: Vec<Complex64> = p.data[0]
        .iter()
        .zip(&p.data[1])
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let mut b1: Vec<Complex64> = p.data[2].iter().map(|&a| Complex64::new(a, 0.0)).collect();
    plan.forward(&mut b0);
    plan.forward(&mut b1);
    let scale = 1.0 / plan.len() as f64;
    let coeffs: Vec<Vec3> = (0..mode_count(n))
        .map(|i| {
            let (a, b) = plan.gather(&b0, i);
            let (c, _) = plan.gather(&b1, i);
            let mut v = [a * scale, b * scale, c * scale];
            project_mode(&plan.kvec[i], &mut v);
            v
        })
        .collect();
    Ok(SpectralField::from_coeffs_unchecked(n, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_divfree_field, Profile, WaveVector};

    #[test]
    fn roundtrip_at_four_n() {
        for n in [2, 3, 5] {
            let u = random_divfree_field(n, &Profile::power_law(1.0, 1.0), 9);
            let p = to_physical(&u, 4 * n).unwrap();
            let back = from_physical(&p, n).unwrap();
            let err = (&back - &u).norm_h() / u.norm_h();
            assert!(err < 1e-12, "n={n} err={err}");
        }
    }

    #[test]
    fn roundtrip_at_minimal_grid() {
        let n = 4;
        let u = random_divfree_field(n, &Profile::power_law(1.0, 0.5), 1);
        let back = from_physical(&to_physical(&u, 2 * n + 1).unwrap(), n).unwrap();
        assert!((&back - &u).norm_h() / u.norm_h() < 1e-12);
    }

    #[test]
    fn small_grid_is_refused() {
        let u = SpectralField::zeros(4);
        assert!(matches!(to_physical(&u, 8), Err(Error::Aliasing { required: 9, .. })));
    }

    #[test]
    fn cosine_wave_peak_is_twice_coefficient() {
        // u = c e2 exp(2 pi i x1) + conj: physical max is 2|c| along e2.
        let k = WaveVector::new(1, 0, 0);
        let c = Complex64::new(0.3, 0.0);
        let u = SpectralField::single_mode(3, k, [CZERO, c, CZERO]).unwrap();
        let p = to_physical(&u, 16).unwrap();
        assert!((p.max_abs() - 2.0 * c.norm()).abs() < 1e-14);
        // direct evaluation at every grid point
        for i in 0..16 {
            let x = i as f64 / 16.0;
            let expect = 2.0 * c.re * (2.0 * std::f64::consts::PI * x).cos();
            for j in 0..16 {
                for l in 0..16 {
                    let got = p.data[1][(i * 16 + j) * 16 + l];
                    assert!((got - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn parseval_against_grid_quadrature() {
        for n in [3, 4] {
            for seed in 0..5 {
                let u = random_divfree_field(n, &Profile::power_law(1.0, 1.0), seed);
                let p = to_physical(&u, 2 * n + 2).unwrap();
                let quad = p.lp_norm(2.0).powi(2);
                let rel = (quad - u.norm_h_sq()).abs() / u.norm_h_sq();
                assert!(rel < 1e-10, "{rel}");
            }
        }
    }
}
