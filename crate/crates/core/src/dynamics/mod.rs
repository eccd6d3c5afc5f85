//! Time stepping of the Galerkin system
//! `du + (nu A u + chi B(u,u)) dt = Q^(1/2) dW` and its relatives.
//!
//! Every path is driven by the counter-based noise of [`crate::noise`], keyed
//! by `(cfg.seed, path, step)`, so a path can be re-run in isolation and two
//! runs sharing a key see the same increments.

mod config;
mod control;
mod flows;
mod record;

use rayon::prelude::*;
use std::ops::Range;

pub use config::{Mode, Scheme, SimConfig};
pub use control::{build_control, perturbed_endpoints, solve_controlled, ControlPath};
pub use flows::{linearized_flow, solve_auxiliary_v, solve_stokes_z};
pub use record::{first_crossing, stopping_time_tau_r, PathRecord, TestFunction};

use crate::error::{Error, Result};
use crate::noise::{CovarianceSpec, NoiseKey, OuTransition, PolarizedSampler};
use crate::nonlinearity::PseudoSpectral;
use crate::spectral::{eigenvalues, re_dot3, theta, SpectralField};

/// Cut-off weight: 1 on `[0, R+1]`, 0 on `[R+2, inf)`, cubic smoothstep between.
pub fn chi_r(r: f64, big_r: f64) -> f64 {
    let x = r - (big_r + 1.0);
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

/// Derivative of [`chi_r`] in `r`; its minimum is -1.5 at `r = R + 1.5`.
pub fn chi_r_derivative(r: f64, big_r: f64) -> f64 {
    let x = r - (big_r + 1.0);
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -6.0 * x * (1.0 - x)
    }
}

/// Per-configuration stepping workspace: FFT plans, eigenvalue tables, decay
/// factors and noise amplitudes.
#[derive(Debug)]
pub struct Stepper {
    cfg: SimConfig,
    cov: CovarianceSpec,
    ps: PseudoSpectral,
    lam: Vec<f64>,
    w_weight: Vec<f64>,
    v_weight: Vec<f64>,
    decay: Vec<f64>,
    noise_std: Vec<f64>,
    sampler: PolarizedSampler,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let cov = cfg.covariance()?;
        let lam = eigenvalues(cfg.n);
        let th = theta(cfg.alpha0);
        let w_weight = lam.iter().map(|l| l.powf(2.0 * th)).collect();
        let v_weight = lam.clone();
        let (decay, std) = match cfg.scheme {
            Scheme::Em => (
                vec![1.0; lam.len()],
                cov.sigma.iter().map(|s| s * cfg.dt.sqrt()).collect::<Vec<_>>(),
            ),
            Scheme::ExpoEm => {
                let ou = OuTransition::new(&cov, cfg.nu, cfg.dt);
                (ou.decay, ou.std)
            }
        };
        let noise_std = std.iter().map(|s| s * cfg.noise_scale).collect();
        Ok(Stepper {
            ps: PseudoSpectral::new(cfg.n, cfg.padding)?,
            sampler: PolarizedSampler::new(cfg.n),
            cfg: cfg.clone(),
            cov,
            lam,
            w_weight,
            v_weight,
            decay,
            noise_std,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Nominal covariance (unaffected by `noise_scale`).
    pub fn covariance(&self) -> &CovarianceSpec {
        &self.cov
    }

    /// Per-mode standard deviation of the sampled increments.
    pub fn noise_std(&self) -> &[f64] {
        &self.noise_std
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    fn weighted(&self, u: &SpectralField, w: &[f64]) -> f64 {
        2.0 * u
            .coeffs()
            .iter()
            .zip(w)
            .map(|(c, w)| w * crate::spectral::norm_sq3(c))
            .sum::<f64>()
    }

    pub fn v_norm_sq(&self, u: &SpectralField) -> f64 {
        self.weighted(u, &self.v_weight)
    }

    pub fn w_norm_sq(&self, u: &SpectralField) -> f64 {
        self.weighted(u, &self.w_weight)
    }

    pub fn w_inner(&self, u: &SpectralField, v: &SpectralField) -> f64 {
        2.0 * u
            .coeffs()
            .iter()
            .zip(v.coeffs())
            .zip(&self.w_weight)
            .map(|((a, b), w)| w * re_dot3(a, b))
            .sum::<f64>()
    }

    /// Cut-off weight applied to the nonlinearity at state `w_sq = |u|_W^2`.
    pub fn chi(&self, w_sq: f64) -> f64 {
        match self.cfg.mode {
            Mode::Cutoff => chi_r(w_sq, self.cfg.cutoff),
            _ => 1.0,
        }
    }

    pub fn chi_derivative(&self, w_sq: f64) -> f64 {
        match self.cfg.mode {
            Mode::Cutoff => chi_r_derivative(w_sq, self.cfg.cutoff),
            _ => 0.0,
        }
    }

    /// `B(u,u)`, or zero when the nonlinearity is disabled. Leaves `u` loaded
    /// for [`Stepper::sym_loaded`].
    pub fn nonlinear(&mut self, u: &SpectralField) -> SpectralField {
        if self.cfg.nonlinear {
            self.ps.b_uu(u)
        } else {
            SpectralField::zeros(self.cfg.n)
        }
    }

    /// `B(u,y) + B(y,u)` for the `u` passed to the last [`Stepper::nonlinear`].
    pub fn sym_loaded(&mut self, y: &SpectralField) -> SpectralField {
        if self.cfg.nonlinear {
            self.ps.sym_loaded(y)
        } else {
            SpectralField::zeros(self.cfg.n)
        }
    }

    pub fn bilinear(&mut self, u: &SpectralField, v: &SpectralField) -> SpectralField {
        if self.cfg.nonlinear {
            self.ps.b_uv(u, v)
        } else {
            SpectralField::zeros(self.cfg.n)
        }
    }

    /// Noise increment of step `step` on path `path`; `None` when noise is off.
    pub fn noise(&self, path: u64, step: usize) -> Option<SpectralField> {
        if self.cfg.mode == Mode::Deterministic {
            return None;
        }
        let key = NoiseKey {
            seed: self.cfg.seed,
            path,
            step: step as u64,
        };
        Some(self.sampler.sample(key, &self.noise_std))
    }

    /// Noise of one step `factor` times longer, built from fine steps
    /// `factor j .. factor (j + 1)` of this stepper so that coarse and fine
    /// runs share their Brownian path.
    pub fn coarse_noise(&self, path: u64, j: usize, factor: usize) -> Option<SpectralField> {
        let mut acc = self.noise(path, factor * j)?;
        for i in 1..factor {
            if self.cfg.scheme == Scheme::ExpoEm {
                for (c, d) in acc.coeffs_mut().iter_mut().zip(&self.decay) {
                    for z in c.iter_mut() {
                        *z *= *d;
                    }
                }
            }
            acc.axpy(1.0, &self.noise(path, factor * j + i)?);
        }
        Some(acc)
    }

    /// Deterministic part of one step applied to `u` with precomputed
    /// nonlinear term `b`, plus `forcing`.
    ///
    /// em: `u - dt (nu A u + chi b) + forcing`;
    /// expo-em: `e^{-nu A dt} (u - dt chi b) + forcing`.
    pub fn advance(
        &self,
        u: &SpectralField,
        b: &SpectralField,
        chi: f64,
        forcing: Option<&SpectralField>,
    ) -> SpectralField {
        let dt = self.cfg.dt;
        let db = dt * chi;
        let mut out = u.clone();
        match self.cfg.scheme {
            Scheme::Em => {
                let nudt = self.cfg.nu * dt;
                for ((o, bb), l) in out.coeffs_mut().iter_mut().zip(b.coeffs()).zip(&self.lam) {
                    let a = nudt * l;
                    for i in 0..3 {
                        o[i] = o[i] - o[i] * a - bb[i] * db;
                    }
                }
            }
            Scheme::ExpoEm => {
                for ((o, bb), d) in out.coeffs_mut().iter_mut().zip(b.coeffs()).zip(&self.decay) {
                    for i in 0..3 {
                        o[i] = (o[i] - bb[i] * db) * *d;
                    }
                }
            }
        }
        if let Some(f) = forcing {
            out.axpy(1.0, f);
        }
        out
    }

    /// One full step from `u` with the given noise increment.
    pub fn step(&mut self, u: &SpectralField, noise: Option<&SpectralField>) -> SpectralField {
        let chi = self.chi(self.w_norm_sq(u));
        let b = self.nonlinear(u);
        self.advance(u, &b, chi, noise)
    }
}

/// One step of the configured scheme (allocates a fresh workspace; loops
/// should hold a [`Stepper`]).
pub fn step(
    state: &SpectralField,
    cfg: &SimConfig,
    noise: Option<&SpectralField>,
) -> Result<SpectralField> {
    if state.resolution() != cfg.n {
        return Err(Error::ResolutionMismatch {
            left: state.resolution(),
            right: cfg.n,
        });
    }
    let out = Stepper::new(cfg)?.step(state, noise);
    if !out.is_finite() {
        return Err(Error::BlowUp { step: 0 });
    }
    Ok(out)
}

/// What to keep besides the scalar series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Keep {
    /// Snapshot every this many steps (0 = none).
    pub snapshot_stride: usize,
    /// Return every state.
    pub states: bool,
}

/// Integrates from `u0` with the given noise source, tracking the record.
pub fn integrate(
    stepper: &mut Stepper,
    u0: &SpectralField,
    phis: &[TestFunction],
    keep: Keep,
    mut noise: impl FnMut(&Stepper, usize) -> Option<SpectralField>,
) -> (PathRecord, Vec<SpectralField>) {
    let cfg = stepper.cfg.clone();
    let steps = cfg.steps();
    let mut rec = PathRecord::new(&cfg, stepper.cov.sigma_sq_total, phis.len(), steps);
    let mut states = Vec::new();
    let mut u = u0.clone();
    let mut drift = vec![0.0; phis.len()];
    for j in 0..=steps {
        let h_sq = u.norm_h_sq();
        let v_sq = stepper.v_norm_sq(&u);
        let w_sq = stepper.w_norm_sq(&u);
        rec.push_state(j, h_sq, v_sq, w_sq);
        for (i, phi) in phis.iter().enumerate() {
            let diff_proj = u.inner(&phi.phi) - u0.inner(&phi.phi);
            rec.mphi[i].push(diff_proj + drift[i]);
            rec.proj[i].push(u.inner(&phi.phi));
        }
        if keep.snapshot_stride > 0 && j % keep.snapshot_stride == 0 {
            rec.snapshots.push((j, u.clone()));
        }
        if j == steps {
            if keep.states {
                states.push(u);
            }
            break;
        }
        let chi = stepper.chi(w_sq);
        let b = stepper.nonlinear(&u);
        for (i, phi) in phis.iter().enumerate() {
            drift[i] += cfg.dt * (cfg.nu * u.inner(&phi.a_phi) + chi * b.inner(&phi.phi));
        }
        let xi = noise(stepper, j);
        let next = stepper.advance(&u, &b, chi, xi.as_ref());
        if keep.states {
            states.push(std::mem::replace(&mut u, next));
        } else {
            u = next;
        }
        if !u.is_finite() {
            rec.blowup = Some(j + 1);
            break;
        }
    }
    rec.finish(cfg.cutoff);
    (rec, states)
}

/// Path `path` of the configured problem started from `cfg`'s initial state.
pub fn simulate_path(cfg: &SimConfig, path: u64) -> Result<PathRecord> {
    simulate_path_with(cfg, path, &cfg.initial_state(), &[])
}

/// As [`simulate_path`] with an explicit start and registered test functions.
pub fn simulate_path_with(
    cfg: &SimConfig,
    path: u64,
    u0: &SpectralField,
    phis: &[TestFunction],
) -> Result<PathRecord> {
    let mut stepper = Stepper::new(cfg)?;
    let keep = Keep {
        snapshot_stride: cfg.snapshot_stride,
        states: false,
    };
    Ok(integrate(&mut stepper, u0, phis, keep, |s, j| s.noise(path, j)).0)
}

/// Records of an ensemble; blown-up paths are kept (partial) and counted.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub config: SimConfig,
    pub paths: Range<u64>,
    pub records: Vec<PathRecord>,
}

impl Ensemble {
    pub fn blowups(&self) -> Vec<(u64, usize)> {
        self.paths
            .clone()
            .zip(&self.records)
            .filter_map(|(p, r)| r.blowup.map(|s| (p, s)))
            .collect()
    }

    /// Records that reached the horizon.
    pub fn complete(&self) -> impl Iterator<Item = &PathRecord> {
        self.records.iter().filter(|r| r.blowup.is_none())
    }
}

/// Runs paths in parallel; the result does not depend on the worker count.
pub fn run_ensemble(
    cfg: &SimConfig,
    paths: Range<u64>,
    u0: &SpectralField,
    phis: &[TestFunction],
) -> Result<Ensemble> {
    Stepper::new(cfg)?;
    let records = paths
        .clone()
        .into_par_iter()
        .map_init(
            || Stepper::new(cfg).expect("validated above"),
            |st, p| integrate(st, u0, phis, Keep::default(), |s, j| s.noise(p, j)).0,
        )
        .collect();
    Ok(Ensemble {
        config: cfg.clone(),
        paths,
        records,
    })
}

/// Same paths at step `2 dt`, driven by the summed fine increments.
pub fn run_coarse_ensemble(
    cfg: &SimConfig,
    paths: Range<u64>,
    u0: &SpectralField,
    phis: &[TestFunction],
) -> Result<Ensemble> {
    let coarse = cfg.coarsened();
    Stepper::new(&coarse)?;
    let fine = Stepper::new(cfg)?;
    let records = paths
        .clone()
        .into_par_iter()
        .map_init(
            || Stepper::new(&coarse).expect("validated above"),
            |st, p| integrate(st, u0, phis, Keep::default(), |_, j| fine.coarse_noise(p, j, 2)).0,
        )
        .collect();
    Ok(Ensemble {
        config: coarse,
        paths,
        records,
    })
}
