//! The bilinear term `B(u, v) = P_div (u . grad) v`.
//!
//! [`b_direct`] sums every triad `l + m = k` of the truncation cube and is the
//! reference. [`PseudoSpectral`] evaluates the same truncated product through
//! zero-padded FFTs in divergence form, `(u . grad) v = div(u (x) v)`, which is
//! exact for divergence-free `u` once the grid holds at least `3N + 1` points
//! per direction.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    self, mode_count, project_mode, sobolev_norm, theta, Fft3, SpectralField, Vec3,
};

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Pseudospectral,
}

#[derive(Clone, Debug)]
pub struct BilinearResult {
    pub field: SpectralField,
    pub method: Method,
    /// Rough floating-point operation count of the evaluation.
    pub flop_count: u64,
}

fn full_cube(u: &SpectralField) -> Vec<Vec3> {
    let n = u.resolution() as i32;
    let s = (2 * n + 1) as usize;
    let mut out = vec![[CZERO; 3]; s * s * s];
    for k1 in -n..=n {
        for k2 in -n..=n {
            for k3 in -n..=n {
                let idx = (((k1 + n) as usize) * s + (k2 + n) as usize) * s + (k3 + n) as usize;
                out[idx] = u.get(spectral::WaveVector::new(k1, k2, k3));
            }
        }
    }
    out
}

fn check_same(u: &SpectralField, v: &SpectralField) -> Result<usize> {
    if u.resolution() != v.resolution() {
        return Err(Error::ResolutionMismatch {
            left: u.resolution(),
            right: v.resolution(),
        });
    }
    Ok(u.resolution())
}

/// Brute-force triad sum:
/// `B_k = 2 pi i sum_{l+m=k} (u_l . m) P_k v_m`, restricted to the cube.
pub fn b_direct(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    Ok(b_direct_counted(u, v)?.0)
}

fn b_direct_counted(u: &SpectralField, v: &SpectralField) -> Result<(SpectralField, u64)> {
    let n = check_same(u, v)? as i32;
    let s = (2 * n + 1) as usize;
    let uf = full_cube(u);
    let vf = full_cube(v);
    let at = |k: [i32; 3]| (((k[0] + n) as usize) * s + (k[1] + n) as usize) * s + (k[2] + n) as usize;
    let mut triads = 0u64;
    let coeffs: Vec<Vec3> = spectral::modes(n as usize)
        .map(|k| {
            let mut acc = [CZERO; 3];
            let lo = |c: i32| (c - n).max(-n);
            let hi = |c: i32| (c + n).min(n);
            for l1 in lo(k.0[0])..=hi(k.0[0]) {
                for l2 in lo(k.0[1])..=hi(k.0[1]) {
                    for l3 in lo(k.0[2])..=hi(k.0[2]) {
                        let l = [l1, l2, l3];
                        let m = [k.0[0] - l1, k.0[1] - l2, k.0[2] - l3];
                        if l == [0, 0, 0] || m == [0, 0, 0] {
                            continue;
                        }
                        let ul = &uf[at(l)];
                        let vm = &vf[at(m)];
                        let adv = ul[0] * m[0] as f64 + ul[1] * m[1] as f64 + ul[2] * m[2] as f64;
                        for i in 0..3 {
                            acc[i] += adv * vm[i];
                        }
                        triads += 1;
                    }
                }
            }
            let f = Complex64::new(0.0, 2.0 * PI);
            let mut out = acc.map(|a| a * f);
            project_mode(&k.as_f64(), &mut out);
            out
        })
        .collect();
    Ok((
        SpectralField::from_coeffs_unchecked(n as usize, coeffs),
        triads * 30,
    ))
}

/// Smallest grid size with prime factors in {2, 3, 5, 7} that is at least
/// `padding * (2N + 1)`.
pub fn padded_grid(n: usize, padding: f64) -> Result<usize> {
    if !(padding >= 1.5) {
        return Err(Error::InsufficientPadding(padding));
    }
    let need = (padding * (2 * n + 1) as f64).ceil() as usize;
    let need = need.max(3 * n + 1);
    let smooth = |mut x: usize| {
        for p in [2, 3, 5, 7] {
            while x % p == 0 {
                x /= p;
            }
        }
        x == 1
    };
    Ok((need..).find(|&m| smooth(m)).unwrap())
}

/// Reusable FFT workspace for the dealiased product at one resolution.
///
/// [`PseudoSpectral::load`] keeps the physical samples of `u`, so that
/// [`PseudoSpectral::b_loaded`] and [`PseudoSpectral::sym_loaded`] can share
/// them within one time step.
pub struct PseudoSpectral {
    fft: Fft3,
    bufs: Vec<Vec<Complex64>>,
    loaded: bool,
}

impl std::fmt::Debug for PseudoSpectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PseudoSpectral").field("fft", &self.fft).finish()
    }
}

impl PseudoSpectral {
    pub fn new(n: usize, padding: f64) -> Result<Self> {
        let m = padded_grid(n, padding)?;
        Self::with_grid(n, m)
    }

    /// Explicit grid size; refuses grids that alias the quadratic product.
    pub fn with_grid(n: usize, m: usize) -> Result<Self> {
        if m < 3 * n + 1 {
            return Err(Error::InsufficientPadding(m as f64 / (2 * n + 1) as f64));
        }
        let fft = Fft3::new(n, m)?;
        let bufs = (0..8).map(|_| fft.new_buffer()).collect();
        Ok(PseudoSpectral {
            fft,
            bufs,
            loaded: false,
        })
    }

    pub fn resolution(&self) -> usize {
        self.fft.resolution()
    }

    pub fn grid(&self) -> usize {
        self.fft.grid()
    }

    /// Approximate flops of one `B(u,u)` evaluation.
    pub fn flops_per_eval(&self) -> u64 {
        let len = self.fft.len() as f64;
        (5.0 * 5.0 * len * len.log2()) as u64
    }

    fn scatter_inverse(&mut self, slot: usize, f: impl Fn(usize) -> (Complex64, Complex64)) {
        let mut buf = std::mem::take(&mut self.bufs[slot]);
        self.fft.scatter(&mut buf, f);
        self.fft.inverse(&mut buf);
        self.bufs[slot] = buf;
    }

    fn forward(&mut self, slot: usize) {
        let mut buf = std::mem::take(&mut self.bufs[slot]);
        self.fft.forward(&mut buf);
        self.bufs[slot] = buf;
    }

    fn check(&self, u: &SpectralField) {
        assert_eq!(u.resolution(), self.resolution(), "resolution mismatch");
    }

    /// Transforms `u` to the grid and keeps it for subsequent calls.
    pub fn load(&mut self, u: &SpectralField) {
        self.check(u);
        let c = u.coeffs();
        self.scatter_inverse(0, |i| (c[i][0], c[i][1]));
        self.scatter_inverse(1, |i| (c[i][2], CZERO));
        self.loaded = true;
    }

    /// Divergence of a symmetric tensor packed as `(00,11) (22,01) (02,12)` in
    /// buffers `first..first+3`, projected and normalised.
    fn div_sym(&mut self, first: usize) -> SpectralField {
        for b in first..first + 3 {
            self.forward(b);
        }
        let scale = 1.0 / self.fft.len() as f64;
        let f = Complex64::new(0.0, 2.0 * PI * scale);
        let n = self.resolution();
        let coeffs = (0..mode_count(n))
            .map(|i| {
                let (t00, t11) = self.fft.gather(&self.bufs[first], i);
                let (t22, t01) = self.fft.gather(&self.bufs[first + 1], i);
                let (t02, t12) = self.fft.gather(&self.bufs[first + 2], i);
                let k = &self.fft.kvec()[i];
                let mut out = [
                    (t00 * k[0] + t01 * k[1] + t02 * k[2]) * f,
                    (t01 * k[0] + t11 * k[1] + t12 * k[2]) * f,
                    (t02 * k[0] + t12 * k[1] + t22 * k[2]) * f,
                ];
                project_mode(k, &mut out);
                out
            })
            .collect();
        SpectralField::from_coeffs_unchecked(n, coeffs)
    }

    /// `B(u,u)` for the loaded `u`.
    pub fn b_loaded(&mut self) -> SpectralField {
        assert!(self.loaded, "no field loaded");
        let len = self.fft.len();
        let (src, dst) = self.bufs.split_at_mut(2);
        let (a, b) = (&src[0], &src[1]);
        for x in 0..len {
            let (u0, u1, u2) = (a[x].re, a[x].im, b[x].re);
            dst[0][x] = Complex64::new(u0 * u0, u1 * u1);
            dst[1][x] = Complex64::new(u2 * u2, u0 * u1);
            dst[2][x] = Complex64::new(u0 * u2, u1 * u2);
        }
        self.div_sym(2)
    }

    /// `B(u,y) + B(y,u)` for the loaded `u`.
    pub fn sym_loaded(&mut self, y: &SpectralField) -> SpectralField {
        assert!(self.loaded, "no field loaded");
        self.check(y);
        let c = y.coeffs();
        self.scatter_inverse(5, |i| (c[i][0], c[i][1]));
        self.scatter_inverse(6, |i| (c[i][2], CZERO));
        let len = self.fft.len();
        let (src, rest) = self.bufs.split_at_mut(2);
        let (dst, ys) = rest.split_at_mut(3);
        for x in 0..len {
            let u = [src[0][x].re, src[0][x].im, src[1][x].re];
            let w = [ys[0][x].re, ys[0][x].im, ys[1][x].re];
            let s = |i: usize, j: usize| u[i] * w[j] + w[i] * u[j];
            dst[0][x] = Complex64::new(s(0, 0), s(1, 1));
            dst[1][x] = Complex64::new(s(2, 2), s(0, 1));
            dst[2][x] = Complex64::new(s(0, 2), s(1, 2));
        }
        self.div_sym(2)
    }

    pub fn b_uu(&mut self, u: &SpectralField) -> SpectralField {
        self.load(u);
        self.b_loaded()
    }

    /// General `B(u,v)`; leaves no field loaded.
    pub fn b_uv(&mut self, u: &SpectralField, v: &SpectralField) -> SpectralField {
        self.check(u);
        self.check(v);
        let (cu, cv) = (u.coeffs(), v.coeffs());
        self.scatter_inverse(0, |i| (cu[i][0], cu[i][1]));
        self.scatter_inverse(1, |i| (cu[i][2], cv[i][0]));
        self.scatter_inverse(2, |i| (cv[i][1], cv[i][2]));
        self.loaded = false;
        let len = self.fft.len();
        {
            let (src, dst) = self.bufs.split_at_mut(3);
            for x in 0..len {
                let u = [src[0][x].re, src[0][x].im, src[1][x].re];
                let v = [src[1][x].im, src[2][x].re, src[2][x].im];
                // tensor u_j v_i, packed row-major in (j, i)
                dst[0][x] = Complex64::new(u[0] * v[0], u[0] * v[1]);
                dst[1][x] = Complex64::new(u[0] * v[2], u[1] * v[0]);
                dst[2][x] = Complex64::new(u[1] * v[1], u[1] * v[2]);
                dst[3][x] = Complex64::new(u[2] * v[0], u[2] * v[1]);
                dst[4][x] = Complex64::new(u[2] * v[2], 0.0);
            }
        }
        for b in 3..8 {
            self.forward(b);
        }
        let scale = 1.0 / self.fft.len() as f64;
        let f = Complex64::new(0.0, 2.0 * PI * scale);
        let n = self.resolution();
        let coeffs = (0..mode_count(n))
            .map(|i| {
                let mut t = [CZERO; 9];
                for p in 0..5 {
                    let (a, b) = self.fft.gather(&self.bufs[3 + p], i);
                    t[2 * p] = a;
                    if 2 * p + 1 < 9 {
                        t[2 * p + 1] = b;
                    }
                }
                let k = &self.fft.kvec()[i];
                let mut out = [CZERO; 3];
                for (comp, o) in out.iter_mut().enumerate() {
                    *o = (t[comp] * k[0] + t[3 + comp] * k[1] + t[6 + comp] * k[2]) * f;
                }
                project_mode(k, &mut out);
                out
            })
            .collect();
        SpectralField::from_coeffs_unchecked(n, coeffs)
    }
}

/// `B(u,v)` through the dealiased pseudo-spectral path with padding 3/2.
pub fn b_pseudospectral(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let n = check_same(u, v)?;
    let mut ps = PseudoSpectral::new(n, 1.5)?;
    Ok(ps.b_uv(u, v))
}

pub fn bilinear(u: &SpectralField, v: &SpectralField, method: Method) -> Result<BilinearResult> {
    match method {
        Method::Direct => {
            let (field, flop_count) = b_direct_counted(u, v)?;
            Ok(BilinearResult {
                field,
                method,
                flop_count,
            })
        }
        Method::Pseudospectral => {
            let n = check_same(u, v)?;
            let mut ps = PseudoSpectral::new(n, 1.5)?;
            let field = ps.b_uv(u, v);
            Ok(BilinearResult {
                field,
                method,
                flop_count: ps.flops_per_eval() * 8 / 5,
            })
        }
    }
}

/// Target and domain exponents of the continuity estimate for `B`:
/// `D(A^theta(alpha)) x D(A^theta(alpha)) -> D(A^(alpha - 1/4))`, with the
/// target lowered to `1/4 - eps` at `alpha = 1/2`.
pub fn breg_exponents(alpha: f64, eps: Option<f64>) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} must be positive")));
    }
    let target = if alpha == 0.5 {
        match eps {
            Some(e) if e > 0.0 => 0.25 - e,
            _ => {
                return Err(Error::OutOfRange(
                    "alpha = 1/2 requires a positive epsilon".into(),
                ))
            }
        }
    } else {
        alpha - 0.25
    };
    Ok((target, theta(alpha)))
}

/// Ratio of `|A^target B(u,v)|` to `|A^theta u| |A^theta v|` for a precomputed
/// `b = B(u,v)`.
pub fn breg_ratio_of(
    b: &SpectralField,
    u: &SpectralField,
    v: &SpectralField,
    alpha: f64,
    eps: Option<f64>,
) -> Result<f64> {
    let (target, dom) = breg_exponents(alpha, eps)?;
    let den = sobolev_norm(u, dom) * sobolev_norm(v, dom);
    if den == 0.0 {
        return Err(Error::UndefinedRatio("zero input field"));
    }
    Ok(sobolev_norm(b, target) / den)
}

pub fn breg_ratio(u: &SpectralField, v: &SpectralField, alpha: f64, eps: Option<f64>) -> Result<f64> {
    if u.is_zero() || v.is_zero() {
        return Err(Error::UndefinedRatio("zero input field"));
    }
    breg_exponents(alpha, eps)?;
    let b = b_pseudospectral(u, v)?;
    breg_ratio_of(&b, u, v, alpha, eps)
}

/// `|A^(-gamma) B(u,u)| / (|u|_H |u|_V)` for `gamma` in `(3/2, 2)`.
pub fn bnorm_negative_check(u: &SpectralField, gamma: f64) -> Result<f64> {
    if !(gamma > 1.5 && gamma < 2.0) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} outside (3/2, 2)")));
    }
    if u.is_zero() {
        return Err(Error::UndefinedRatio("zero input field"));
    }
    let mut ps = PseudoSpectral::new(u.resolution(), 1.5)?;
    let b = ps.b_uu(u);
    Ok(bnorm_negative_of(&b, u, gamma))
}

pub(crate) fn bnorm_negative_of(b: &SpectralField, u: &SpectralField, gamma: f64) -> f64 {
    sobolev_norm(b, -gamma) / (u.norm_h() * sobolev_norm(u, 0.5))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub eps: Option<f64>,
    pub n: usize,
    pub max: f64,
    pub median: f64,
    pub count: usize,
}

/// Random-field sweep of [`breg_ratio`]: `B(u,v)` is evaluated once per pair
/// and reused for every `alpha`.
///
/// Fields for seed `s` at all resolutions share their common modes, so rows at
/// different `N` compare the same functions truncated differently.
pub fn ratio_sweep(
    alphas: &[(f64, Option<f64>)],
    resolutions: &[usize],
    seeds: std::ops::Range<u64>,
    profile: &spectral::Profile,
) -> Result<(Vec<SweepRow>, Vec<SweepCell>)> {
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &n in resolutions {
        let mut ps = PseudoSpectral::new(n, 1.5)?;
        let mut per_alpha: Vec<Vec<f64>> = vec![Vec::new(); alphas.len()];
        for seed in seeds.clone() {
            let u = spectral::random_divfree_field(n, profile, 2 * seed);
            let v = spectral::random_divfree_field(n, profile, 2 * seed + 1);
            let b = ps.b_uv(&u, &v);
            for (j, &(alpha, eps)) in alphas.iter().enumerate() {
                let ratio = breg_ratio_of(&b, &u, &v, alpha, eps)?;
                per_alpha[j].push(ratio);
                rows.push(SweepRow {
                    alpha,
                    n,
                    seed,
                    ratio,
                });
            }
        }
        for (j, &(alpha, eps)) in alphas.iter().enumerate() {
            cells.push(summarize(alpha, eps, n, &per_alpha[j]));
        }
    }
    Ok((rows, cells))
}

fn summarize(alpha: f64, eps: Option<f64>, n: usize, xs: &[f64]) -> SweepCell {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if sorted.is_empty() {
        f64::NAN
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    SweepCell {
        alpha,
        eps,
        n,
        max: sorted.last().copied().unwrap_or(f64::NAN),
        median,
        count: xs.len(),
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("alpha,N,seed,ratio\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{:e}\n", r.alpha, r.n, r.seed, r.ratio));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_divfree_field, Profile, WaveVector};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_arguments() {
        let v = random_divfree_field(3, &Profile::power_law(1.0, 1.0), 1);
        let z = SpectralField::zeros(3);
        assert!(b_direct(&z, &v).unwrap().is_zero());
        assert!(b_pseudospectral(&v, &z).unwrap().norm_h() < 1e-12 * v.norm_h());
    }

    #[test]
    fn single_real_mode_self_advection_vanishes() {
        let u = SpectralField::single_mode(
            3,
            WaveVector::new(1, 2, 0),
            [c(0.0, 0.0), c(0.0, 0.0), c(0.7, -0.2)],
        )
        .unwrap();
        assert!(b_direct(&u, &u).unwrap().norm_h() < 1e-14);
        assert!(b_pseudospectral(&u, &u).unwrap().norm_h() < 1e-13);
    }

    /// Two-mode product evaluated by hand: u = a e^{2 pi i x1} + c.c. with
    /// a = (0, a2, 0), v = b e^{2 pi i x2} + c.c. with b = (b1, 0, 0). Then
    /// (u.grad) v = 2 pi i a2 b e^{2 pi i (x1+x2)} + 2 pi i conj(a2) b
    /// e^{2 pi i (x2-x1)} + c.c., projected per output mode.
    #[test]
    fn two_mode_product_matches_hand_triads() {
        let n = 2;
        let a2 = c(0.4, 0.1);
        let b1 = c(-0.3, 0.5);
        let u = SpectralField::single_mode(n, WaveVector::new(1, 0, 0), [c(0., 0.), a2, c(0., 0.)])
            .unwrap();
        let v = SpectralField::single_mode(n, WaveVector::new(0, 1, 0), [b1, c(0., 0.), c(0., 0.)])
            .unwrap();
        let out = b_direct(&u, &v).unwrap();
        let i2pi = c(0.0, 2.0 * PI);
        let proj = |k: [f64; 3], w: Vec3| {
            let mut w = w;
            project_mode(&k, &mut w);
            w
        };
        // k = (1,1,0): l = (1,0,0), m = (0,1,0); u_l.m = a2
        let e1 = proj([1., 1., 0.], [i2pi * a2 * b1, c(0., 0.), c(0., 0.)]);
        // k = (-1,1,0): l = (-1,0,0), m = (0,1,0); u_l.m = conj(a2)
        let e2 = proj([-1., 1., 0.], [i2pi * a2.conj() * b1, c(0., 0.), c(0., 0.)]);
        let g1 = out.get(WaveVector::new(1, 1, 0));
        let g2 = out.get(WaveVector::new(-1, 1, 0));
        for i in 0..3 {
            assert!((g1[i] - e1[i]).norm() < 1e-14);
            assert!((g2[i] - e2[i]).norm() < 1e-14);
        }
        let support: Vec<_> = out
            .iter()
            .filter(|(_, v)| spectral::norm_sq3(v) > 0.0)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(support.len(), 2, "{support:?}");
        let ps = b_pseudospectral(&u, &v).unwrap();
        assert!((&ps - &out).norm_h() < 1e-14);
    }

    #[test]
    fn pseudospectral_matches_direct() {
        for n in [2, 3, 4] {
            let p = Profile::power_law(1.0, 1.0);
            let u = random_divfree_field(n, &p, 10);
            let v = random_divfree_field(n, &p, 11);
            let d = b_direct(&u, &v).unwrap();
            let s = b_pseudospectral(&u, &v).unwrap();
            let rel = (&d - &s).norm_h() / d.norm_h();
            assert!(rel < 1e-12, "n={n} rel={rel}");
            let mut ps = PseudoSpectral::new(n, 1.5).unwrap();
            let uu = ps.b_uu(&u);
            let rel = (&uu - &b_direct(&u, &u).unwrap()).norm_h() / uu.norm_h();
            assert!(rel < 1e-12);
            ps.load(&u);
            let sym = ps.sym_loaded(&v);
            let expect = &b_direct(&u, &v).unwrap() + &b_direct(&v, &u).unwrap();
            assert!((&sym - &expect).norm_h() / expect.norm_h() < 1e-12);
        }
    }

    #[test]
    fn padding_below_three_halves_is_refused() {
        assert!(matches!(PseudoSpectral::new(4, 1.2), Err(Error::InsufficientPadding(_))));
        assert!(PseudoSpectral::with_grid(4, 12).is_err());
        assert!(PseudoSpectral::with_grid(4, 13).is_ok());
        assert_eq!(padded_grid(6, 1.5).unwrap(), 20);
        assert!(padded_grid(6, 2.0).unwrap() >= 26);
    }

    #[test]
    fn resolution_mismatch() {
        let u = SpectralField::zeros(2);
        let v = SpectralField::zeros(3);
        assert!(matches!(b_direct(&u, &v), Err(Error::ResolutionMismatch { .. })));
    }

    #[test]
    fn breg_ratio_scale_invariant_and_guarded() {
        let p = Profile::power_law(1.0, 2.0);
        let u = random_divfree_field(4, &p, 1);
        let v = random_divfree_field(4, &p, 2);
        let r = breg_ratio(&u, &v, 0.75, None).unwrap();
        let r2 = breg_ratio(&u.scaled(3.5), &v.scaled(3.5), 0.75, None).unwrap();
        assert!((r - r2).abs() <= 1e-12 * r);
        assert!(r.is_finite() && r > 0.0);
        assert!(breg_ratio(&u, &v, 0.5, None).is_err());
        assert!(breg_ratio(&u, &v, 0.5, Some(0.01)).is_ok());
        assert!(matches!(
            breg_ratio(&SpectralField::zeros(4), &v, 0.75, None),
            Err(Error::UndefinedRatio(_))
        ));
    }

    #[test]
    fn negative_norm_check() {
        let u = SpectralField::single_mode(4, WaveVector::new(1, 1, 0), [c(0., 0.), c(0., 0.), c(1., 0.)])
            .unwrap();
        assert!(bnorm_negative_check(&u, 1.75).unwrap() < 1e-15);
        assert!(bnorm_negative_check(&u, 1.5).is_err());
        assert!(bnorm_negative_check(&u, 2.0).is_err());
        let w = random_divfree_field(4, &Profile::power_law(1.0, 1.0), 3);
        let r = bnorm_negative_check(&w, 1.75).unwrap();
        let r2 = bnorm_negative_check(&w.scaled(-2.0), 1.75).unwrap();
        assert!((r - r2).abs() <= 1e-12 * r);
    }
}
