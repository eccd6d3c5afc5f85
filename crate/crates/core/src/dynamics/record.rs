use std::fmt::Write as _;

use serde::Serialize;

use super::SimConfig;
use crate::error::{Error, Result};
use crate::noise::{q_power_apply, CovarianceSpec, QPower};
use crate::spectral::{apply_stokes_power, SpectralField};

/// A finite-mode test function with the quantities the martingale checks need.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub name: String,
    pub phi: SpectralField,
    pub a_phi: SpectralField,
    /// `|Q^(1/2) phi|_H^2`.
    pub q_norm_sq: f64,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, phi: SpectralField, cov: &CovarianceSpec) -> Self {
        TestFunction {
            name: name.into(),
            a_phi: apply_stokes_power(&phi, 1.0),
            q_norm_sq: q_power_apply(cov, &phi, QPower::Half).norm_h_sq(),
            phi,
        }
    }
}

/// Scalar time series of one path plus optional snapshots.
///
/// Index `j` of every series refers to time `j dt`. Integrals use the
/// left-endpoint rule, matching the explicit treatment of the drift.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub dt: f64,
    pub nu: f64,
    /// Nominal `sigma^2` used in the energy functionals.
    pub sigma_sq: f64,
    pub times: Vec<f64>,
    pub h_sq: Vec<f64>,
    pub v_sq: Vec<f64>,
    pub w_sq: Vec<f64>,
    /// `[n-1][j] = int_0^{t_j} |u|_H^{2n-2} |u|_V^2`.
    pub int_v: Vec<Vec<f64>>,
    /// `[n-1][j] = int_0^{t_j} |u|_H^{2n-2}`.
    pub int_h: Vec<Vec<f64>>,
    /// `M^phi` per registered test function.
    pub mphi: Vec<Vec<f64>>,
    /// `<u, phi>` per registered test function.
    pub proj: Vec<Vec<f64>>,
    #[serde(skip)]
    pub snapshots: Vec<(usize, SpectralField)>,
    /// First grid time with `|u|_W^2 >= R`, `+inf` if none.
    pub tau_r: f64,
    /// Step at which a non-finite state appeared.
    pub blowup: Option<usize>,
}

impl PathRecord {
    pub(crate) fn new(cfg: &SimConfig, sigma_sq: f64, n_phi: usize, steps: usize) -> Self {
        let cap = steps + 1;
        let series = |k: usize| (0..k).map(|_| Vec::with_capacity(cap)).collect::<Vec<_>>();
        PathRecord {
            dt: cfg.dt,
            nu: cfg.nu,
            sigma_sq,
            times: Vec::with_capacity(cap),
            h_sq: Vec::with_capacity(cap),
            v_sq: Vec::with_capacity(cap),
            w_sq: Vec::with_capacity(cap),
            int_v: series(cfg.n_max),
            int_h: series(cfg.n_max),
            mphi: series(n_phi),
            proj: series(n_phi),
            snapshots: Vec::new(),
            tau_r: f64::INFINITY,
            blowup: None,
        }
    }

    pub(crate) fn push_state(&mut self, j: usize, h_sq: f64, v_sq: f64, w_sq: f64) {
        self.times.push(j as f64 * self.dt);
        if j == 0 {
            for s in self.int_v.iter_mut().chain(self.int_h.iter_mut()) {
                s.push(0.0);
            }
        } else {
            let (h, v) = (self.h_sq[j - 1], self.v_sq[j - 1]);
            for (n1, (iv, ih)) in self.int_v.iter_mut().zip(self.int_h.iter_mut()).enumerate() {
                let hp = h.powi(n1 as i32);
                iv.push(iv[j - 1] + self.dt * hp * v);
                ih.push(ih[j - 1] + self.dt * hp);
            }
        }
        self.h_sq.push(h_sq);
        self.v_sq.push(v_sq);
        self.w_sq.push(w_sq);
    }

    pub(crate) fn finish(&mut self, big_r: f64) {
        self.tau_r = stopping_time_tau_r(self, big_r);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_max(&self) -> usize {
        self.int_v.len()
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.n_max() {
            return Err(Error::MissingAccumulator(format!(
                "E^{n} (tracked up to n = {})",
                self.n_max()
            )));
        }
        Ok(())
    }

    /// `|u_t|^{2n} + 2 n nu int |u|^{2n-2} |u|_V^2`.
    pub fn alpha(&self, n: usize, j: usize) -> Result<f64> {
        self.check_n(n)?;
        Ok(self.h_sq[j].powi(n as i32) + 2.0 * n as f64 * self.nu * self.int_v[n - 1][j])
    }

    /// `|u_0|^{2n} + n (2n-1) sigma^2 int |u|^{2n-2}`.
    pub fn beta(&self, n: usize, j: usize) -> Result<f64> {
        self.check_n(n)?;
        let nf = n as f64;
        Ok(self.h_sq[0].powi(n as i32) + nf * (2.0 * nf - 1.0) * self.sigma_sq * self.int_h[n - 1][j])
    }

    /// `E^n` at step `j`.
    pub fn energy(&self, n: usize, j: usize) -> Result<f64> {
        Ok(self.alpha(n, j)? - self.beta(n, j)?)
    }

    /// CSV time series every `stride` steps:
    /// `t,h_norm,v_norm_sq,w_norm_sq,E1..En_max,Mphi_1..`.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("t,h_norm,v_norm_sq,w_norm_sq");
        for n in 1..=self.n_max() {
            let _ = write!(out, ",E{n}");
        }
        for i in 1..=self.mphi.len() {
            let _ = write!(out, ",Mphi_{i}");
        }
        out.push('\n');
        for j in (0..self.len()).step_by(stride) {
            let _ = write!(
                out,
                "{:e},{:e},{:e},{:e}",
                self.times[j],
                self.h_sq[j].sqrt(),
                self.v_sq[j],
                self.w_sq[j]
            );
            for n in 1..=self.n_max() {
                let _ = write!(out, ",{:e}", self.energy(n, j).expect("n tracked"));
            }
            for m in &self.mphi {
                let _ = write!(out, ",{:e}", m[j]);
            }
            out.push('\n');
        }
        out
    }
}

/// First index with `series[j] >= level`.
pub fn first_crossing(series: &[f64], level: f64) -> Option<usize> {
    series.iter().position(|&x| x >= level)
}

/// First grid time at which `|u|_W^2 >= R`; `+inf` if the set is empty.
///
/// A crossing between grid points is reported at the next grid point.
pub fn stopping_time_tau_r(record: &PathRecord, big_r: f64) -> f64 {
    first_crossing(&record.w_sq, big_r).map_or(f64::INFINITY, |j| record.times[j])
}
