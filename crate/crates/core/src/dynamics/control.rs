use super::record::PathRecord;
use super::{integrate, Keep, Mode, SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::spectral::{random_divfree_field, Profile, SpectralField};

/// Control steering `x` to `y` and the state path it produces.
#[derive(Clone, Debug)]
pub struct ControlPath {
    pub dt: f64,
    /// End of the uncontrolled leg.
    pub t_star: f64,
    /// `u(t_j)`, `j = 0..=steps`.
    pub states: Vec<SpectralField>,
    /// `w(t_{j+1}) - w(t_j)`.
    pub increments: Vec<SpectralField>,
    pub sup_w_sq: f64,
}

impl ControlPath {
    /// Cumulative control `w(t_j)` with `w(0) = 0`.
    pub fn w(&self) -> Vec<SpectralField> {
        let n = self.states[0].resolution();
        let mut acc = SpectralField::zeros(n);
        let mut out = vec![acc.clone()];
        for dw in &self.increments {
            acc.axpy(1.0, dw);
            out.push(acc.clone());
        }
        out
    }
}

fn controlled_config(cfg: &SimConfig, horizon: f64, big_r: f64) -> SimConfig {
    SimConfig {
        mode: Mode::Cutoff,
        cutoff: big_r,
        horizon,
        ..cfg.clone()
    }
}

/// Uncontrolled evolution until `T* <= T/2`, then linear interpolation to
/// `y`; the control increments are whatever makes the scheme reproduce that
/// path exactly. `T*` is halved until the free leg stays in `|u|_W^2 <= R`.
pub fn build_control(
    x: &SpectralField,
    y: &SpectralField,
    horizon: f64,
    big_r: f64,
    cfg: &SimConfig,
) -> Result<ControlPath> {
    let c = controlled_config(cfg, horizon, big_r);
    let mut st = Stepper::new(&c)?;
    for (name, f) in [("x", x), ("y", y)] {
        let w = st.w_norm_sq(f);
        if w > big_r / 2.0 {
            return Err(Error::ControlFailed(format!(
                "|{name}|_W^2 = {w:.4} exceeds R/2 = {}",
                big_r / 2.0
            )));
        }
    }
    let steps = c.steps();
    if steps == 0 {
        return Err(Error::ControlFailed("horizon shorter than one step".into()));
    }
    let free_map = |st: &mut Stepper, u: &SpectralField| {
        let chi = st.chi(st.w_norm_sq(u));
        let b = st.nonlinear(u);
        st.advance(u, &b, chi, None)
    };

    let mut budget = steps / 2;
    let free = loop {
        let mut path = vec![x.clone()];
        let mut ok = true;
        for _ in 0..budget {
            let next = free_map(&mut st, path.last().unwrap());
            if !next.is_finite() || st.w_norm_sq(&next) > big_r {
                ok = false;
                break;
            }
            path.push(next);
        }
        if ok {
            break path;
        }
        budget /= 2;
    };
    let j_star = free.len() - 1;
    let t_star = j_star as f64 * c.dt;

    let mut states = free;
    let anchor = states[j_star].clone();
    let span = (steps - j_star) as f64;
    for j in j_star + 1..=steps {
        let s = (j - j_star) as f64 / span;
        let mut u = anchor.scaled(1.0 - s);
        u.axpy(s, y);
        states.push(u);
    }
    let increments = states
        .windows(2)
        .map(|w| &w[1] - &free_map(&mut st, &w[0]))
        .collect();
    let sup_w_sq = states.iter().map(|u| st.w_norm_sq(u)).fold(0.0, f64::max);
    if sup_w_sq > big_r {
        return Err(Error::ControlFailed(format!(
            "constructed path reaches |u|_W^2 = {sup_w_sq:.4} > R = {big_r}"
        )));
    }
    Ok(ControlPath {
        dt: c.dt,
        t_star,
        states,
        increments,
        sup_w_sq,
    })
}

/// `u(t_{j+1}) = F(u(t_j)) + (w(t_{j+1}) - w(t_j))` from `u(0) = x`, with `F`
/// the deterministic cut-off step.
pub fn solve_controlled(
    x: &SpectralField,
    increments: &[SpectralField],
    big_r: f64,
    cfg: &SimConfig,
) -> Result<(PathRecord, Vec<SpectralField>)> {
    let c = controlled_config(cfg, increments.len() as f64 * cfg.dt, big_r);
    let mut st = Stepper::new(&c)?;
    let keep = Keep {
        snapshot_stride: cfg.snapshot_stride,
        states: true,
    };
    let (rec, states) = integrate(&mut st, x, &[], keep, |_, j| Some(increments[j].clone()));
    if let Some(step) = rec.blowup {
        return Err(Error::BlowUp { step });
    }
    Ok((rec, states))
}

/// Endpoint deviation `|u^delta(T) - u(T)|_W` when the control is perturbed
/// by `delta (t/T) g` with a fixed direction `|g|_W = 1`.
pub fn perturbed_endpoints(
    x: &SpectralField,
    control: &ControlPath,
    big_r: f64,
    cfg: &SimConfig,
    deltas: &[f64],
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let n = x.resolution();
    let st = Stepper::new(cfg)?;
    let g = random_divfree_field(n, &Profile::power_law(1.0, 2.0), seed);
    let g = g.scaled(1.0 / st.w_norm_sq(&g).sqrt());
    let steps = control.increments.len();
    let target = control.states.last().expect("non-empty path");
    deltas
        .iter()
        .map(|&d| {
            let inc: Vec<SpectralField> = control
                .increments
                .iter()
                .map(|dw| {
                    let mut p = dw.clone();
                    p.axpy(d / steps as f64, &g);
                    p
                })
                .collect();
            let (_, states) = solve_controlled(x, &inc, big_r, cfg)?;
            let end = states.last().expect("non-empty path");
            Ok((d, st.w_norm_sq(&(end - target)).sqrt()))
        })
        .collect()
}
