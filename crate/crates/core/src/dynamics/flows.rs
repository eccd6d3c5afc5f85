use super::record::PathRecord;
use super::{integrate, Keep, Mode, SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Linear problem `dz + nu A z dt = Q^(1/2) dW`, `z(0) = 0`, on the noise of
/// path `path`. Returns the record and `z` at every step.
pub fn solve_stokes_z(cfg: &SimConfig, path: u64) -> Result<(PathRecord, Vec<SpectralField>)> {
    let lin = SimConfig {
        nonlinear: false,
        mode: if cfg.mode == Mode::Deterministic {
            Mode::Deterministic
        } else {
            Mode::Full
        },
        ..cfg.clone()
    };
    let mut stepper = Stepper::new(&lin)?;
    let keep = Keep {
        snapshot_stride: cfg.snapshot_stride,
        states: true,
    };
    let z0 = SpectralField::zeros(cfg.n);
    Ok(integrate(&mut stepper, &z0, &[], keep, |s, j| s.noise(path, j)))
}

fn check_len(cfg: &SimConfig, len: usize, what: &str) -> Result<()> {
    if len != cfg.steps() + 1 {
        return Err(Error::ConfigMismatch(format!(
            "{what} has {len} states, the grid needs {}",
            cfg.steps() + 1
        )));
    }
    Ok(())
}

/// `dv/dt + nu A v + chi B(v+z, v+z) = 0`, `v(0) = u0`, discretised with the
/// same scheme as the full problem so that `v + z` reproduces `u` step by step.
pub fn solve_auxiliary_v(
    u0: &SpectralField,
    z: &[SpectralField],
    cfg: &SimConfig,
) -> Result<(PathRecord, Vec<SpectralField>)> {
    check_len(cfg, z.len(), "z path")?;
    let mut stepper = Stepper::new(cfg)?;
    let sigma_sq = stepper.covariance().sigma_sq_total;
    let mut rec = PathRecord::new(cfg, sigma_sq, 0, cfg.steps());
    let mut v = u0.clone();
    let mut out = Vec::with_capacity(z.len());
    for (j, zj) in z.iter().enumerate() {
        rec.push_state(j, v.norm_h_sq(), stepper.v_norm_sq(&v), stepper.w_norm_sq(&v));
        if cfg.snapshot_stride > 0 && j % cfg.snapshot_stride == 0 {
            rec.snapshots.push((j, v.clone()));
        }
        if j + 1 == z.len() {
            out.push(v);
            break;
        }
        let u = &v + zj;
        let chi = stepper.chi(stepper.w_norm_sq(&u));
        let b = stepper.nonlinear(&u);
        let next = stepper.advance(&v, &b, chi, None);
        out.push(std::mem::replace(&mut v, next));
        if !v.is_finite() {
            rec.blowup = Some(j + 1);
            rec.finish(cfg.cutoff);
            return Err(Error::BlowUp { step: j + 1 });
        }
    }
    rec.finish(cfg.cutoff);
    Ok((rec, out))
}

/// Derivative of the discrete flow along the stored path `u`:
/// `Y' = -nu A Y - chi (B(Y,u) + B(u,Y)) - 2 chi'(|u|_W^2) <u,Y>_W B(u,u)`,
/// `Y(0) = h`, with the same scheme and grid as `u`.
pub fn linearized_flow(
    u: &[SpectralField],
    h: &SpectralField,
    cfg: &SimConfig,
) -> Result<Vec<SpectralField>> {
    check_len(cfg, u.len(), "u path")?;
    let mut stepper = Stepper::new(cfg)?;
    let mut y = h.clone();
    let mut out = Vec::with_capacity(u.len());
    for (j, uj) in u.iter().enumerate() {
        if j + 1 == u.len() {
            out.push(y);
            break;
        }
        let lin = linear_drift(&mut stepper, uj, &y);
        let next = stepper.advance(&y, &lin, 1.0, None);
        out.push(std::mem::replace(&mut y, next));
        if !y.is_finite() {
            return Err(Error::BlowUp { step: j + 1 });
        }
    }
    Ok(out)
}

/// Directional derivative of `chi(|u|_W^2) B(u,u)` along `y`.
pub(crate) fn linear_drift(stepper: &mut Stepper, u: &SpectralField, y: &SpectralField) -> SpectralField {
    let w_sq = stepper.w_norm_sq(u);
    let chi = stepper.chi(w_sq);
    let dchi = stepper.chi_derivative(w_sq);
    let b = stepper.nonlinear(u);
    let sym = stepper.sym_loaded(y);
    let mut lin = sym.scaled(chi);
    if dchi != 0.0 {
        lin.axpy(2.0 * dchi * stepper.w_inner(u, y), &b);
    }
    lin
}
