use std::ops::Range;

use rayon::prelude::*;

use super::stats::mean_se;
use super::TestReport;
use crate::dynamics::{run_ensemble, Mode, SimConfig, Stepper, TestFunction};
use crate::error::{Error, Result};
use crate::spectral::{re_dot3, SpectralField, FOUR_PI_SQ};

/// Bounded observable `psi`.
#[derive(Clone, Debug, PartialEq)]
pub enum Psi {
    /// `<u, phi>` clipped to `[-clip, clip]`.
    Projection { phi: SpectralField, clip: f64 },
    /// `|u|_H^2` clipped to `[0, clip]`.
    Energy { clip: f64 },
}

impl Psi {
    pub fn eval(&self, u: &SpectralField) -> f64 {
        match self {
            Psi::Projection { phi, clip } => u.inner(phi).clamp(-clip, *clip),
            Psi::Energy { clip } => u.norm_h_sq().min(*clip),
        }
    }
}

/// Normalisation of the stochastic weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BelWeights {
    Correct,
    /// Twice the correct weight: a deliberately wrong estimator.
    Doubled,
}

impl BelWeights {
    fn factor(self) -> f64 {
        match self {
            BelWeights::Correct => 1.0,
            BelWeights::Doubled => 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BelOutcome {
    pub bel: f64,
    pub bel_se: f64,
    pub fd: f64,
    pub fd_se: f64,
    pub report: TestReport,
}

/// `<a, Sigma^{-1} b>_H` with `Sigma` the per-mode variance of one increment.
fn inv_cov_inner(inv_var: &[f64], a: &SpectralField, b: &SpectralField) -> f64 {
    2.0 * a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .zip(inv_var)
        .map(|((x, y), w)| w * re_dot3(x, y))
        .sum::<f64>()
}

fn probe_config(cfg: &SimConfig, t: f64) -> Result<SimConfig> {
    if !(t > 0.0) {
        return Err(Error::OutOfRange(format!("t = {t} must be positive")));
    }
    let c = SimConfig {
        horizon: t,
        mode: Mode::Cutoff,
        ..cfg.clone()
    };
    c.validate()?;
    Ok(c)
}

/// Gradient of `x -> E psi(u_x(t))` along `h` for the discrete cut-off chain,
/// by the integration-by-parts weight
/// `(1/n) sum_j <Sigma^{-1} Y_{j+1}, xi_j>` (`Y` the derivative flow, `xi_j`
/// the Gaussian part of step `j`, `Sigma` its covariance), compared with a
/// central finite difference on common noise.
#[allow(clippy::too_many_arguments)]
pub fn bel_gradient_probe(
    x: &SpectralField,
    h: &SpectralField,
    psi: &Psi,
    t: f64,
    paths: Range<u64>,
    cfg: &SimConfig,
    eps: f64,
    weights: BelWeights,
) -> Result<BelOutcome> {
    let c = probe_config(cfg, t)?;
    let steps = c.steps();
    if steps == 0 {
        return Err(Error::OutOfRange("t shorter than one step".into()));
    }
    if paths.end < paths.start.saturating_add(2) {
        return Err(Error::OutOfRange("need at least 2 paths".into()));
    }
    let proto = Stepper::new(&c)?;
    let inv_var: Vec<f64> = proto.noise_std().iter().map(|s| 1.0 / (s * s)).collect();
    let factor = weights.factor() / steps as f64;
    let mut xp = x.clone();
    xp.axpy(eps, h);
    let mut xm = x.clone();
    xm.axpy(-eps, h);

    let samples: Vec<(f64, f64)> = paths
        .clone()
        .into_par_iter()
        .map_init(
            || Stepper::new(&c).expect("validated"),
            |st, p| {
                let (mut u, mut y, mut up, mut um) = (x.clone(), h.clone(), xp.clone(), xm.clone());
                let mut weight = 0.0;
                for j in 0..steps {
                    let w_sq = st.w_norm_sq(&u);
                    let (chi, dchi) = (st.chi(w_sq), st.chi_derivative(w_sq));
                    let b = st.nonlinear(&u);
                    let mut lin = st.sym_loaded(&y).scaled(chi);
                    if dchi != 0.0 {
                        lin.axpy(2.0 * dchi * st.w_inner(&u, &y), &b);
                    }
                    let y_next = st.advance(&y, &lin, 1.0, None);
                    let xi = st.noise(p, j).expect("noise is on");
                    weight += inv_cov_inner(&inv_var, &y_next, &xi);
                    u = st.advance(&u, &b, chi, Some(&xi));
                    up = st.step(&up, Some(&xi));
                    um = st.step(&um, Some(&xi));
                    y = y_next;
                }
                (
                    psi.eval(&u) * weight * factor,
                    (psi.eval(&up) - psi.eval(&um)) / (2.0 * eps),
                )
            },
        )
        .collect();

    let (bel_s, fd_s): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    let finite = bel_s.iter().chain(&fd_s).all(|v| v.is_finite());
    let (bel, bel_se) = mean_se(&bel_s);
    let (fd, fd_se) = mean_se(&fd_s);
    let se = (bel_se * bel_se + fd_se * fd_se).sqrt();
    let mut report = TestReport::new("bel gradient");
    report
        .param("resolution", c.n)
        .param("dt", c.dt)
        .param("t", t)
        .param("paths", [paths.start, paths.end])
        .param("seed", c.seed)
        .param("cutoff", c.cutoff)
        .param("eps", eps)
        .param("bel", bel)
        .param("bel_se", bel_se)
        .param("fd", fd)
        .param("fd_se", fd_se);
    report.check("bel_minus_fd", bel - fd, se, -4.0 * se, 4.0 * se);
    if !finite {
        report.inconclusive("non-finite samples");
    }
    Ok(BelOutcome {
        bel,
        bel_se,
        fd,
        fd_se,
        report,
    })
}

/// Scales read off a full-mode pilot ensemble started at `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BelPilot {
    /// Requested quantile of `sup_t |u|_W^2` over the pilot paths.
    pub sup_w_sq: f64,
    /// 99th percentile of `|<u(t), phi>|`.
    pub projection_p99: f64,
    /// 99th percentile of `|u(t)|_H^2`.
    pub energy_p99: f64,
    pub complete: usize,
}

impl BelPilot {
    /// Clip level of ten times the typical range of the observable.
    pub fn clip(&self, energy: bool) -> f64 {
        10.0 * if energy { self.energy_p99 } else { self.projection_p99 }
    }
}

fn sorted_quantile(mut xs: Vec<f64>, q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[((xs.len() - 1) as f64 * q).round() as usize]
}

/// Runs the uncut dynamics from `x` to time `t` on `paths` and returns the
/// `q`-quantile of `sup |u|_W^2` (a cut-off level that binds only on the
/// tail) and the typical ranges of the two observables.
pub fn bel_pilot(
    cfg: &SimConfig,
    x: &SpectralField,
    phi: &SpectralField,
    t: f64,
    paths: Range<u64>,
    q: f64,
) -> Result<BelPilot> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange(format!("quantile {q} outside [0, 1]")));
    }
    let full = SimConfig {
        mode: Mode::Full,
        horizon: t,
        ..cfg.clone()
    };
    let tf = TestFunction::new("phi", phi.clone(), &full.covariance()?);
    let ens = run_ensemble(&full, paths, x, &[tf])?;
    let done: Vec<_> = ens.complete().collect();
    if done.is_empty() {
        return Err(Error::OutOfRange("every pilot path blew up".into()));
    }
    let last = |v: &Vec<f64>| *v.last().expect("non-empty record");
    Ok(BelPilot {
        sup_w_sq: sorted_quantile(done.iter().map(|r| r.w_sq.iter().copied().fold(0.0, f64::max)).collect(), q),
        projection_p99: sorted_quantile(done.iter().map(|r| last(&r.proj[0]).abs()).collect(), 0.99),
        energy_p99: sorted_quantile(done.iter().map(|r| last(&r.h_sq)).collect(), 0.99),
        complete: done.len(),
    })
}

/// Linear problem (`B` off), `psi = <., phi>`: the expectation of the weighted
/// estimator, evaluated exactly through `E[<a,xi><b,xi>] = <Sigma a, b>`
/// with the stepper's own decay factors and increment variances, and the
/// closed form `<e^{-nu A t} h, phi>` it must reproduce.
pub fn bel_linear_exact(
    h: &SpectralField,
    phi: &SpectralField,
    t: f64,
    cfg: &SimConfig,
    weights: BelWeights,
) -> Result<(f64, f64)> {
    let c = SimConfig {
        nonlinear: false,
        ..probe_config(cfg, t)?
    };
    let st = Stepper::new(&c)?;
    let steps = c.steps();
    let var: Vec<f64> = st.noise_std().iter().map(|s| s * s).collect();
    let inv_var: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let zero = SpectralField::zeros(c.n);
    let decay_pow = |f: &SpectralField, p: usize| {
        let mut g = f.clone();
        for _ in 0..p {
            g = st.advance(&g, &zero, 1.0, None);
        }
        g
    };
    let mut y = h.clone();
    let mut total = 0.0;
    for j in 0..steps {
        let y_next = st.advance(&y, &zero, 1.0, None);
        // Sigma a with a = D^{n-1-j} phi, the sensitivity of psi(u_n) to xi_j
        let mut sa = decay_pow(phi, steps - 1 - j);
        for (cf, v) in sa.coeffs_mut().iter_mut().zip(&var) {
            for z in cf.iter_mut() {
                *z *= *v;
            }
        }
        total += inv_cov_inner(&inv_var, &y_next, &sa);
        y = y_next;
    }
    let estimate = total * weights.factor() / steps as f64;
    let analytic = h
        .diagonal(|k| (-FOUR_PI_SQ * k.norm_sq() as f64 * c.nu * t).exp())
        .inner(phi);
    Ok((estimate, analytic))
}
