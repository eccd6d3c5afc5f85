//! Fourier representation of mean-zero, divergence-free periodic vector fields
//! on the unit torus.
//!
//! A field at resolution `N` carries the coefficients `u_k` for all integer
//! wavevectors in the cube `|k_i| <= N`, `k != 0`. Only one member of every
//! `{k, -k}` pair is stored (the lexicographically positive one); the other is
//! its complex conjugate, so every stored field is real in physical space.
//!
//! The Stokes operator is diagonal with eigenvalues `lambda_k = 4 pi^2 |k|^2`,
//! and all norms follow Parseval on the unit torus:
//! `|A^alpha u|^2 = sum_k lambda_k^(2 alpha) |u_k|^2` over the full cube.

pub mod fft;
pub mod io;
mod random;

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{from_physical, to_physical, Fft3, PhysicalField};
pub use random::{random_divfree_field, Profile};

pub const FOUR_PI_SQ: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Complex 3-vector of Fourier amplitudes.
pub type Vec3 = [Complex64; 3];

pub(crate) const ZERO3: Vec3 = [Complex64::new(0.0, 0.0); 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector(pub [i32; 3]);

impl WaveVector {
    pub const fn new(k1: i32, k2: i32, k3: i32) -> Self {
        WaveVector([k1, k2, k3])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn max_abs(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    /// Lexicographically positive: the stored member of a `{k, -k}` pair.
    pub fn is_representative(&self) -> bool {
        *self > WaveVector([0, 0, 0])
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl std::fmt::Display for WaveVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// Stokes eigenvalue `4 pi^2 |k|^2` on the unit torus.
pub fn stokes_eigenvalue(k: WaveVector) -> Result<f64> {
    if k.is_zero() {
        return Err(Error::ZeroWaveVector);
    }
    Ok(eigenvalue(k))
}

#[inline]
pub(crate) fn eigenvalue(k: WaveVector) -> f64 {
    FOUR_PI_SQ * k.norm_sq() as f64
}

/// Regularity exponent paired with `alpha`: `1/2 + alpha/2` up to `alpha = 1/2`,
/// `1/4 + alpha` beyond.
pub fn theta(alpha: f64) -> f64 {
    if alpha <= 0.5 {
        0.5 + alpha / 2.0
    } else {
        0.25 + alpha
    }
}

#[inline]
fn side(n: usize) -> usize {
    2 * n + 1
}

/// Number of stored representatives at resolution `n`.
pub fn mode_count(n: usize) -> usize {
    (side(n).pow(3) - 1) / 2
}

/// Storage slot of `k` and whether the stored value must be conjugated.
///
/// Returns `None` for `k = 0` or `k` outside the truncation cube.
#[inline]
pub fn mode_index(k: WaveVector, n: usize) -> Option<(usize, bool)> {
    let ni = n as i32;
    if k.max_abs() > ni || k.is_zero() {
        return None;
    }
    let s = side(n) as i64;
    let full = ((k.0[0] + ni) as i64 * s + (k.0[1] + ni) as i64) * s + (k.0[2] + ni) as i64;
    let centre = (s * s * s - 1) / 2;
    if full > centre {
        Some(((full - centre - 1) as usize, false))
    } else {
        Some(((centre - full - 1) as usize, true))
    }
}

/// Representative wavevector stored at slot `idx`.
#[inline]
pub fn wavevector(idx: usize, n: usize) -> WaveVector {
    let s = side(n);
    let full = idx + (s * s * s - 1) / 2 + 1;
    let ni = n as i32;
    let k3 = (full % s) as i32 - ni;
    let k2 = ((full / s) % s) as i32 - ni;
    let k1 = (full / (s * s)) as i32 - ni;
    WaveVector([k1, k2, k3])
}

/// Stored representatives in slot order.
pub fn modes(n: usize) -> impl Iterator<Item = WaveVector> {
    (0..mode_count(n)).map(move |i| wavevector(i, n))
}

/// Stokes eigenvalues in slot order.
pub fn eigenvalues(n: usize) -> Vec<f64> {
    modes(n).map(eigenvalue).collect()
}

#[inline]
pub(crate) fn dot_k(k: &[f64; 3], v: &Vec3) -> Complex64 {
    v[0] * k[0] + v[1] * k[1] + v[2] * k[2]
}

#[inline]
pub(crate) fn project_mode(k: &[f64; 3], v: &mut Vec3) {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let d = dot_k(k, v) / k2;
    for (vi, ki) in v.iter_mut().zip(k) {
        *vi -= d * *ki;
    }
}

#[inline]
pub(crate) fn norm_sq3(v: &Vec3) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

/// Real part of `sum_i a_i conj(b_i)`.
#[inline]
pub(crate) fn re_dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0].re * b[0].re
        + a[0].im * b[0].im
        + a[1].re * b[1].re
        + a[1].im * b[1].im
        + a[2].re * b[2].re
        + a[2].im * b[2].im
}

/// Coefficients that are real-symmetric but not necessarily divergence-free.
#[derive(Clone, Debug, PartialEq)]
pub struct RawField {
    n: usize,
    coeffs: Vec<Vec3>,
}

impl RawField {
    pub fn zeros(n: usize) -> Self {
        RawField {
            n,
            coeffs: vec![ZERO3; mode_count(n)],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(WaveVector) -> Vec3) -> Self {
        RawField {
            n,
            coeffs: modes(n).map(&mut f).collect(),
        }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Vec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec3] {
        &mut self.coeffs
    }
}

/// Leray projection: removes the component of every coefficient along `k`.
pub fn leray_project(raw: RawField) -> SpectralField {
    let RawField { n, mut coeffs } = raw;
    for (i, c) in coeffs.iter_mut().enumerate() {
        project_mode(&wavevector(i, n).as_f64(), c);
    }
    SpectralField { n, coeffs }
}

/// Mean-zero, divergence-free, real periodic vector field in Fourier form.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n: usize,
    coeffs: Vec<Vec3>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        SpectralField {
            n,
            coeffs: vec![ZERO3; mode_count(n)],
        }
    }

    /// Field supported on `{k, -k}` with coefficient `amplitude` at `k`
    /// (projected onto the plane orthogonal to `k`).
    pub fn single_mode(n: usize, k: WaveVector, amplitude: Vec3) -> Result<Self> {
        let (idx, conj) = mode_index(k, n).ok_or_else(|| {
            if k.is_zero() {
                Error::ZeroWaveVector
            } else {
                Error::OutOfRange(format!("{k} outside resolution {n}"))
            }
        })?;
        let mut u = Self::zeros(n);
        let mut a = if conj {
            amplitude.map(|c| c.conj())
        } else {
            amplitude
        };
        project_mode(&wavevector(idx, n).as_f64(), &mut a);
        u.coeffs[idx] = a;
        Ok(u)
    }

    /// Builds a field from slot-ordered coefficients that the caller
    /// guarantees are orthogonal to their wavevectors.
    pub(crate) fn from_coeffs_unchecked(n: usize, coeffs: Vec<Vec3>) -> Self {
        debug_assert_eq!(coeffs.len(), mode_count(n));
        SpectralField { n, coeffs }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Vec3] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Vec3] {
        &mut self.coeffs
    }

    pub fn into_raw(self) -> RawField {
        RawField {
            n: self.n,
            coeffs: self.coeffs,
        }
    }

    /// Coefficient at any `k` in the cube (zero outside it and at `k = 0`).
    pub fn get(&self, k: WaveVector) -> Vec3 {
        match mode_index(k, self.n) {
            Some((i, false)) => self.coeffs[i],
            Some((i, true)) => self.coeffs[i].map(|c| c.conj()),
            None => ZERO3,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (WaveVector, &Vec3)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (wavevector(i, self.n), c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| norm_sq3(c) == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// `L^2` inner product over the torus.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.n, other.n, "resolution mismatch");
        2.0 * self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| re_dot3(a, b))
            .sum::<f64>()
    }

    pub fn norm_h_sq(&self) -> f64 {
        2.0 * self.coeffs.iter().map(norm_sq3).sum::<f64>()
    }

    pub fn norm_h(&self) -> f64 {
        self.norm_h_sq().sqrt()
    }

    /// `sqrt(sum |k.u_k|^2/|k|^2) / |u|_H`, zero for the zero field.
    pub fn divergence_residual(&self) -> f64 {
        let total = self.norm_h_sq();
        if total == 0.0 {
            return 0.0;
        }
        let div: f64 = self
            .iter()
            .map(|(k, c)| 2.0 * dot_k(&k.as_f64(), c).norm_sqr() / k.norm_sq() as f64)
            .sum();
        (div / total).sqrt()
    }

    pub fn scaled(&self, c: f64) -> SpectralField {
        SpectralField {
            n: self.n,
            coeffs: self.coeffs.iter().map(|v| v.map(|z| z * c)).collect(),
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert_eq!(self.n, x.n, "resolution mismatch");
        for (s, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            for i in 0..3 {
                s[i] += v[i] * a;
            }
        }
    }

    /// Multiplies the coefficient at every stored `k` by `f(k)`.
    pub fn diagonal(&self, mut f: impl FnMut(WaveVector) -> f64) -> SpectralField {
        SpectralField {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let s = f(wavevector(i, self.n));
                    v.map(|z| z * s)
                })
                .collect(),
        }
    }

    /// Copy at a different resolution: extra modes are zero, dropped modes
    /// are discarded.
    pub fn resized(&self, n: usize) -> SpectralField {
        let mut out = SpectralField::zeros(n);
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c = self.get(wavevector(i, n));
        }
        out
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, c: f64) -> SpectralField {
        self.scaled(c)
    }
}

/// `A^alpha u`.
pub fn apply_stokes_power(u: &SpectralField, alpha: f64) -> SpectralField {
    if alpha == 0.0 {
        return u.clone();
    }
    u.diagonal(|k| eigenvalue(k).powf(alpha))
}

/// `|A^alpha u|_H`.
pub fn sobolev_norm(u: &SpectralField, alpha: f64) -> f64 {
    sobolev_norm_sq(u, alpha).sqrt()
}

pub fn sobolev_norm_sq(u: &SpectralField, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return u.norm_h_sq();
    }
    2.0 * u
        .iter()
        .map(|(k, c)| eigenvalue(k).powf(2.0 * alpha) * norm_sq3(c))
        .sum::<f64>()
}

/// `<A^alpha u, A^alpha v>_H`.
pub fn sobolev_inner(u: &SpectralField, v: &SpectralField, alpha: f64) -> f64 {
    assert_eq!(u.n, v.n, "resolution mismatch");
    2.0 * u
        .coeffs
        .iter()
        .zip(&v.coeffs)
        .enumerate()
        .map(|(i, (a, b))| eigenvalue(wavevector(i, u.n)).powf(2.0 * alpha) * re_dot3(a, b))
        .sum::<f64>()
}

/// Polarisation pair orthonormal to `k`: Gram-Schmidt of the first coordinate
/// axis not parallel to `k`, completed by `k/|k| x e1`.
pub fn polarization(k: WaveVector) -> [[f64; 3]; 2] {
    let kf = k.as_f64();
    let kn = k.norm();
    let kh = [kf[0] / kn, kf[1] / kn, kf[2] / kn];
    let axis = (0..3)
        .find(|&j| {
            let nz = k.0.iter().enumerate().filter(|&(i, &c)| i != j && c != 0).count();
            nz > 0
        })
        .unwrap_or(0);
    let mut e1 = [0.0; 3];
    e1[axis] = 1.0;
    let d = kh[axis];
    for i in 0..3 {
        e1[i] -= d * kh[i];
    }
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for c in e1.iter_mut() {
        *c /= n1;
    }
    let e2 = [
        kh[1] * e1[2] - kh[2] * e1[1],
        kh[2] * e1[0] - kh[0] * e1[2],
        kh[0] * e1[1] - kh[1] * e1[0],
    ];
    [e1, e2]
}
