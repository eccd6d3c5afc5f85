use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{modes, polarization, SpectralField, Vec3};

/// Amplitude of the random coefficients as a function of `|k|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Zero,
    /// `amplitude * |k|^(-exponent)`.
    PowerLaw { amplitude: f64, exponent: f64 },
    /// `amplitude * |k|^(-exponent)` on the shell band `[kmin, kmax]`, zero elsewhere.
    Band {
        amplitude: f64,
        exponent: f64,
        kmin: f64,
        kmax: f64,
    },
}

impl Profile {
    pub fn power_law(amplitude: f64, exponent: f64) -> Self {
        Profile::PowerLaw {
            amplitude,
            exponent,
        }
    }

    pub fn amplitude(&self, kn: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::PowerLaw {
                amplitude,
                exponent,
            } => amplitude * kn.powf(-exponent),
            Profile::Band {
                amplitude,
                exponent,
                kmin,
                kmax,
            } => {
                if kn >= kmin && kn <= kmax {
                    amplitude * kn.powf(-exponent)
                } else {
                    0.0
                }
            }
        }
    }
}

fn mode_stream(k: super::WaveVector) -> u64 {
    let p = |c: i32| (c as i64 + 0x8000) as u64 & 0xffff;
    (p(k.0[0]) << 32) | (p(k.0[1]) << 16) | p(k.0[2])
}

/// Random divergence-free field with `E|u_k|^2 = profile(|k|)^2`.
///
/// Each coefficient is a pure function of `(seed, k)`, so fields drawn with the
/// same seed at two resolutions agree on their common modes.
pub fn random_divfree_field(n: usize, profile: &Profile, seed: u64) -> SpectralField {
    let coeffs: Vec<Vec3> = modes(n)
        .map(|k| {
            let a = profile.amplitude(k.norm());
            if a == 0.0 {
                return [Complex64::new(0.0, 0.0); 3];
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(mode_stream(k));
            let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
            let s = a * 0.5;
            let g1 = Complex64::new(g(), g()) * s;
            let g2 = Complex64::new(g(), g()) * s;
            let [e1, e2] = polarization(k);
            [
                g1 * e1[0] + g2 * e2[0],
                g1 * e1[1] + g2 * e2[1],
                g1 * e1[2] + g2 * e2[2],
            ]
        })
        .collect();
    SpectralField::from_coeffs_unchecked(n, coeffs)
}
