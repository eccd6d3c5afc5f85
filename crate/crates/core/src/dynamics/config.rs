use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{render, KeyValues};
use crate::error::{Error, Result};
use crate::noise::{build_covariance_with, CovarianceSpec};
use crate::spectral::{random_divfree_field, Profile, SpectralField, FOUR_PI_SQ};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Explicit Euler-Maruyama.
    Em,
    /// Exact linear part and noise per mode, explicit nonlinearity.
    ExpoEm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Full,
    /// Nonlinearity weighted by `chi_R(|u|_W^2)`.
    Cutoff,
    /// Noise switched off.
    Deterministic,
    Auxiliary,
    Linearized,
}

macro_rules! keyword_enum {
    ($ty:ident { $($v:ident => $s:literal),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($ty::$v),)*
                    _ => Err(Error::InvalidValue {
                        key: stringify!($ty).to_lowercase(),
                        value: s.to_string(),
                    }),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$v => $s,)* })
            }
        }
    };
}

keyword_enum!(Scheme { Em => "em", ExpoEm => "expo-em" });
keyword_enum!(Mode {
    Full => "full",
    Cutoff => "cutoff",
    Deterministic => "deterministic",
    Auxiliary => "auxiliary",
    Linearized => "linearized",
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub nu: f64,
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub mode: Mode,
    /// Cut-off level `R`; also the level of the recorded stopping time.
    pub cutoff: f64,
    pub alpha0: f64,
    pub q0: f64,
    pub seed: u64,
    pub snapshot_stride: usize,
    /// Highest `n` of the tracked energy functionals `E^n`.
    pub n_max: usize,
    pub padding: f64,
    /// Include `B`; off gives the linear (Stokes) problem.
    pub nonlinear: bool,
    /// Multiplies the sampled noise only; the functionals keep the nominal
    /// covariance. Anything other than 1 is a deliberately wrong model.
    pub noise_scale: f64,
    pub allow_low_alpha: bool,
    /// Initial state: zero when the amplitude is 0, else a random field with
    /// power-law profile.
    pub init_amplitude: f64,
    pub init_exponent: f64,
    pub init_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 6,
            nu: 1.0,
            dt: 1e-3,
            horizon: 0.032,
            scheme: Scheme::ExpoEm,
            mode: Mode::Full,
            cutoff: 100.0,
            alpha0: 0.25,
            q0: 1000.0,
            seed: 0,
            snapshot_stride: 1,
            n_max: 2,
            padding: 1.5,
            nonlinear: true,
            noise_scale: 1.0,
            allow_low_alpha: false,
            init_amplitude: 0.0,
            init_exponent: 2.0,
            init_seed: 0,
        }
    }
}

impl SimConfig {
    pub const KEYS: &'static [&'static str] = &[
        "resolution",
        "nu",
        "dt",
        "horizon",
        "scheme",
        "mode",
        "cutoff",
        "alpha0",
        "q0",
        "seed",
        "snapshot_stride",
        "n_max",
        "padding",
        "nonlinear",
        "noise_scale",
        "allow_low_alpha",
        "init_amplitude",
        "init_exponent",
        "init_seed",
    ];

    /// Number of steps `horizon / dt` (rounded to the nearest integer).
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn lambda_max(&self) -> f64 {
        FOUR_PI_SQ * 3.0 * (self.n * self.n) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::OutOfRange(msg));
        if self.n == 0 {
            return bad("resolution must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.horizon >= 0.0) {
            return bad(format!("horizon = {} must be non-negative", self.horizon));
        }
        if ((self.horizon / self.dt) - self.steps() as f64).abs() > 1e-6 {
            return bad(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            ));
        }
        if !(self.nu > 0.0) {
            return bad(format!("nu = {} must be positive", self.nu));
        }
        if self.scheme == Scheme::Em && self.nu * self.dt * self.lambda_max() > 1.0 {
            return bad(format!(
                "em is unstable: nu dt lambda_max = {:.3} > 1 (use expo-em or a smaller dt)",
                self.nu * self.dt * self.lambda_max()
            ));
        }
        if self.mode == Mode::Cutoff && self.cutoff < 1.0 {
            return bad(format!("cutoff R = {} must be at least 1", self.cutoff));
        }
        if !(self.noise_scale >= 0.0) {
            return bad(format!("noise_scale = {} must be non-negative", self.noise_scale));
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        Ok(())
    }

    pub fn covariance(&self) -> Result<CovarianceSpec> {
        build_covariance_with(self.alpha0, self.q0, self.n, self.allow_low_alpha)
    }

    pub fn initial_state(&self) -> SpectralField {
        if self.init_amplitude == 0.0 {
            SpectralField::zeros(self.n)
        } else {
            let p = Profile::power_law(self.init_amplitude, self.init_exponent);
            random_divfree_field(self.n, &p, self.init_seed)
        }
    }

    /// Same problem at step `2 dt`.
    pub fn coarsened(&self) -> SimConfig {
        SimConfig {
            dt: 2.0 * self.dt,
            ..self.clone()
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text, Self::KEYS)?;
        let d = SimConfig::default();
        let cfg = SimConfig {
            n: kv.get_or("resolution", d.n)?,
            nu: kv.get_or("nu", d.nu)?,
            dt: kv.get_or("dt", d.dt)?,
            horizon: kv.get_or("horizon", d.horizon)?,
            scheme: kv.get_or("scheme", d.scheme)?,
            mode: kv.get_or("mode", d.mode)?,
            cutoff: kv.get_or("cutoff", d.cutoff)?,
            alpha0: kv.get_or("alpha0", d.alpha0)?,
            q0: kv.get_or("q0", d.q0)?,
            seed: kv.get_or("seed", d.seed)?,
            snapshot_stride: kv.get_or("snapshot_stride", d.snapshot_stride)?,
            n_max: kv.get_or("n_max", d.n_max)?,
            padding: kv.get_or("padding", d.padding)?,
            nonlinear: kv.get_or("nonlinear", d.nonlinear)?,
            noise_scale: kv.get_or("noise_scale", d.noise_scale)?,
            allow_low_alpha: kv.get_or("allow_low_alpha", d.allow_low_alpha)?,
            init_amplitude: kv.get_or("init_amplitude", d.init_amplitude)?,
            init_exponent: kv.get_or("init_exponent", d.init_exponent)?,
            init_seed: kv.get_or("init_seed", d.init_seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; parses back to an identical configuration.
    pub fn to_text(&self) -> String {
        render([
            ("resolution", self.n.to_string()),
            ("nu", format!("{:?}", self.nu)),
            ("dt", format!("{:?}", self.dt)),
            ("horizon", format!("{:?}", self.horizon)),
            ("scheme", self.scheme.to_string()),
            ("mode", self.mode.to_string()),
            ("cutoff", format!("{:?}", self.cutoff)),
            ("alpha0", format!("{:?}", self.alpha0)),
            ("q0", format!("{:?}", self.q0)),
            ("seed", self.seed.to_string()),
            ("snapshot_stride", self.snapshot_stride.to_string()),
            ("n_max", self.n_max.to_string()),
            ("padding", format!("{:?}", self.padding)),
            ("nonlinear", self.nonlinear.to_string()),
            ("noise_scale", format!("{:?}", self.noise_scale)),
            ("allow_low_alpha", self.allow_low_alpha.to_string()),
            ("init_amplitude", format!("{:?}", self.init_amplitude)),
            ("init_exponent", format!("{:?}", self.init_exponent)),
            ("init_seed", self.init_seed.to_string()),
        ])
    }
}
