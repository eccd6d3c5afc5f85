//! Trace-class noise `Q^(1/2) dW` with `Q^(1/2) = q0 A^(-3/4 - alpha0)`.
//!
//! `Q` is diagonal in the real Fourier basis `sqrt(2) e_p cos(2 pi k.x)`,
//! `sqrt(2) e_p sin(2 pi k.x)` (polarisations `e_1, e_2` orthogonal to `k`),
//! with eigenvalue `sigma_k^2` on every basis function built from `k`. Hence
//! `sigma^2 = Tr Q = sum over all k != 0 in the cube and both polarisations of
//! sigma_k^2`.
//!
//! Gaussian draws come from a ChaCha stream keyed by the run seed, selected by
//! the path id and positioned by the step index, so any `(seed, path, step)`
//! increment can be regenerated in isolation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::{eigenvalue, modes, polarization, SpectralField, Vec3};

/// Smallest `alpha0` accepted without the exploration override.
pub const ALPHA0_MIN: f64 = 1.0 / 6.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSpec {
    pub alpha0: f64,
    pub q0: f64,
    pub n: usize,
    /// `sigma_k` per stored slot (shared by both polarisations and by `-k`).
    pub sigma: Vec<f64>,
    pub sigma_sq_total: f64,
}

pub fn build_covariance(alpha0: f64, q0: f64, n: usize) -> Result<CovarianceSpec> {
    build_covariance_with(alpha0, q0, n, false)
}

/// As [`build_covariance`]; `allow_low_alpha` admits `alpha0 <= 1/6`.
pub fn build_covariance_with(
    alpha0: f64,
    q0: f64,
    n: usize,
    allow_low_alpha: bool,
) -> Result<CovarianceSpec> {
    if !(alpha0 > ALPHA0_MIN || (allow_low_alpha && alpha0 > -0.75)) {
        return Err(Error::OutOfRange(format!(
            "alpha0 = {alpha0} must exceed 1/6 (override to explore)"
        )));
    }
    if !(q0 > 0.0) || !q0.is_finite() {
        return Err(Error::OutOfRange(format!("q0 = {q0} must be positive")));
    }
    if n == 0 {
        return Err(Error::OutOfRange("resolution must be at least 1".into()));
    }
    let sigma: Vec<f64> = modes(n)
        .map(|k| q0 * eigenvalue(k).powf(-0.75 - alpha0))
        .collect();
    let sigma_sq_total = 4.0 * sigma.iter().map(|s| s * s).sum::<f64>();
    Ok(CovarianceSpec {
        alpha0,
        q0,
        n,
        sigma,
        sigma_sq_total,
    })
}

impl CovarianceSpec {
    pub fn sigma_at(&self, k: crate::WaveVector) -> Option<f64> {
        crate::spectral::mode_index(k, self.n).map(|(i, _)| self.sigma[i])
    }

    /// `sigma^2` of the same covariance truncated at every resolution `1..=n`.
    pub fn partial_sums(&self) -> Vec<(usize, f64)> {
        (1..=self.n)
            .map(|m| {
                let s: f64 = modes(self.n)
                    .zip(&self.sigma)
                    .filter(|(k, _)| k.max_abs() as usize <= m)
                    .map(|(_, s)| 4.0 * s * s)
                    .sum();
                (m, s)
            })
            .collect()
    }

    /// Covariance dump: `k1,k2,k3,pol,sigma`, one row per stored mode and
    /// polarisation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k1,k2,k3,pol,sigma\n");
        for (k, s) in modes(self.n).zip(&self.sigma) {
            for pol in 1..=2 {
                out.push_str(&format!("{},{},{},{},{:e}\n", k.0[0], k.0[1], k.0[2], pol, s));
            }
        }
        out
    }

    /// `|Q^(1/2) phi|_H^2`.
    pub fn q_norm_sq(&self, phi: &SpectralField) -> f64 {
        q_power_apply(self, phi, QPower::Half).norm_h_sq()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QPower {
    Half,
    NegHalf,
}

/// `Q^(1/2)` or `Q^(-1/2)` applied mode by mode.
pub fn q_power_apply(cov: &CovarianceSpec, field: &SpectralField, power: QPower) -> SpectralField {
    assert_eq!(cov.n, field.resolution(), "resolution mismatch");
    let mut out = field.clone();
    for (c, s) in out.coeffs_mut().iter_mut().zip(&cov.sigma) {
        let f = match power {
            QPower::Half => *s,
            QPower::NegHalf => 1.0 / *s,
        };
        for z in c.iter_mut() {
            *z *= f;
        }
    }
    out
}

/// Address of one increment in the noise stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub seed: u64,
    pub path: u64,
    pub step: u64,
}

/// Four standard normals per stored mode: real and imaginary parts for the two
/// polarisations.
pub fn standard_normals(key: NoiseKey, count: usize) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    rng.set_stream(key.path);
    rng.set_word_pos((key.step as u128) << 32);
    (0..count)
        .map(|_| {
            let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
            [g(), g(), g(), g()]
        })
        .collect()
}

/// Maps standard normals to a field whose coordinate along every unit basis
/// function built from `k` has standard deviation `std[k]`.
#[derive(Clone, Debug)]
pub struct PolarizedSampler {
    n: usize,
    pol: Vec<[[f64; 3]; 2]>,
}

impl PolarizedSampler {
    pub fn new(n: usize) -> Self {
        PolarizedSampler {
            n,
            pol: modes(n).map(polarization).collect(),
        }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn field(&self, normals: &[[f64; 4]], std: &[f64]) -> SpectralField {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let coeffs: Vec<Vec3> = normals
            .iter()
            .zip(&self.pol)
            .zip(std)
            .map(|((g, [e1, e2]), s)| {
                let a = Complex64::new(g[0], g[1]) * (s * h);
                let b = Complex64::new(g[2], g[3]) * (s * h);
                [a * e1[0] + b * e2[0], a * e1[1] + b * e2[1], a * e1[2] + b * e2[2]]
            })
            .collect();
        SpectralField::from_coeffs_unchecked(self.n, coeffs)
    }

    pub fn sample(&self, key: NoiseKey, std: &[f64]) -> SpectralField {
        self.field(&standard_normals(key, self.pol.len()), std)
    }
}

/// `Q^(1/2) (W(t + dt) - W(t))`.
pub fn sample_wiener_increment(cov: &CovarianceSpec, dt: f64, key: NoiseKey) -> SpectralField {
    if dt == 0.0 {
        return SpectralField::zeros(cov.n);
    }
    let std: Vec<f64> = cov.sigma.iter().map(|s| s * dt.sqrt()).collect();
    PolarizedSampler::new(cov.n).sample(key, &std)
}

/// Exact one-step transition of `dz + nu A z dt = Q^(1/2) dW` per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct OuTransition {
    pub decay: Vec<f64>,
    pub std: Vec<f64>,
}

impl OuTransition {
    pub fn new(cov: &CovarianceSpec, nu: f64, dt: f64) -> Self {
        let (decay, std) = modes(cov.n)
            .zip(&cov.sigma)
            .map(|(k, s)| {
                let rate = nu * eigenvalue(k);
                let decay = (-rate * dt).exp();
                // (1 - e^{-2 r dt}) / (2 r) without cancellation at small r dt
                let var = s * s * (-(-2.0 * rate * dt).exp_m1()) / (2.0 * rate);
                (decay, var.sqrt())
            })
            .unzip();
        OuTransition { decay, std }
    }
}

/// Decay factors and Gaussian part of the exact Ornstein-Uhlenbeck step.
pub fn sample_ou_increment(
    cov: &CovarianceSpec,
    nu: f64,
    dt: f64,
    key: NoiseKey,
) -> Result<(Vec<f64>, SpectralField)> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange(format!("dt = {dt} must be positive")));
    }
    let ou = OuTransition::new(cov, nu, dt);
    let noise = PolarizedSampler::new(cov.n).sample(key, &ou.std);
    Ok((ou.decay, noise))
}
