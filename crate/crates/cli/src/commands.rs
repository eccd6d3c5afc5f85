//! Subcommand bodies. Each returns an [`Outcome`]; persistence and exit codes
//! are handled by the caller.

use std::ops::Range;

use anyhow::{bail, Context, Result};
use clap::Args;
use navsto::dynamics::{
    build_control, integrate, linearized_flow, perturbed_endpoints, run_coarse_ensemble, run_ensemble,
    simulate_path, solve_auxiliary_v, solve_controlled, solve_stokes_z, Ensemble, Keep, Mode, PathRecord,
    SimConfig, Stepper,
};
use navsto::selection::{
    check_semiflow, default_menu, path_csv, select, semiflow_csv, stages_csv, funnel_csv, unseparated_pairs,
    SelectionCriterion, SelectionMap,
};
use navsto::spectral::io::snapshot_bytes;
use navsto::spectral::{random_divfree_field, Profile, SpectralField, WaveVector};
use navsto::verifier::{
    bel_gradient_probe, bel_linear_exact, bel_pilot, cosine_mode, endpoint_inequality, inequality_sweep,
    standard_test_functions, test_doob, test_energy_supermartingale, test_mp2_martingale, test_weak_strong_with,
    BelWeights, MartingaleInput, Psi, SweepSpec, TestReport, Verdict,
};
use navsto::nonlinearity::sweep_csv;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::manifest::Outcome;

fn reports_outcome(reports: &[TestReport], extra_verdict: Verdict) -> Result<Outcome> {
    let verdict = reports.iter().fold(extra_verdict, |v, r| v.combine(r.verdict));
    let summary: String = reports.iter().map(TestReport::summary).collect();
    let mut out = Outcome::new(verdict, summary.clone());
    out.add("reports.json", serde_json::to_string_pretty(reports)?);
    out.add("summary.txt", summary);
    Ok(out)
}

fn census_csv(rows: &[(u64, usize)]) -> String {
    let mut s = String::from("path,step\n");
    for (p, j) in rows {
        s.push_str(&format!("{p},{j}\n"));
    }
    s
}

/// Blow-ups of the fine and (optional) coarse ensembles.
fn census(fine: &Ensemble, coarse: Option<&Ensemble>) -> Vec<(u64, usize)> {
    let mut rows = fine.blowups();
    if let Some(c) = coarse {
        rows.extend(c.blowups());
    }
    rows.sort_unstable();
    rows.dedup_by_key(|r| r.0);
    rows
}

/// A verifier that could not run because too many paths blew up is
/// inconclusive, not an error.
fn with_census(result: Result<Outcome>, rows: &[(u64, usize)]) -> Result<Outcome> {
    let mut out = match result {
        Ok(o) => o,
        Err(e) if !rows.is_empty() => Outcome::new(
            Verdict::Inconclusive,
            format!("ensemble unusable: {e:#}\n{} paths blew up\n", rows.len()),
        ),
        Err(e) => return Err(e),
    };
    if !rows.is_empty() {
        out.verdict = out.verdict.combine(Verdict::Inconclusive);
        out.add("blowups.csv", census_csv(rows));
    }
    Ok(out)
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// CSV row every this many steps.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Also write binary snapshots every `snapshot_stride` steps.
    #[arg(long)]
    pub snapshots: bool,
}

struct PathOutput {
    files: Vec<(String, Vec<u8>)>,
    blowup: Option<usize>,
}

fn simulate_one(cfg: &SimConfig, p: u64, a: &SimulateArgs) -> Result<PathOutput> {
    let mut files = Vec::new();
    let snapshots = |rec: &PathRecord, tag: &str, files: &mut Vec<(String, Vec<u8>)>| {
        if a.snapshots {
            for (j, u) in &rec.snapshots {
                files.push((format!("path_{p}{tag}_step_{j}.snap"), snapshot_bytes(u)));
            }
        }
    };
    let quiet = SimConfig {
        snapshot_stride: if a.snapshots { cfg.snapshot_stride } else { 0 },
        ..cfg.clone()
    };
    match cfg.mode {
        Mode::Auxiliary => {
            let (zrec, zs) = solve_stokes_z(&quiet, p)?;
            files.push((format!("path_{p}_z.csv"), zrec.to_csv(a.stride).into_bytes()));
            snapshots(&zrec, "_z", &mut files);
            if let Some(step) = zrec.blowup {
                return Ok(PathOutput { files, blowup: Some(step) });
            }
            match solve_auxiliary_v(&cfg.initial_state(), &zs, &quiet) {
                Ok((vrec, _)) => {
                    files.push((format!("path_{p}_v.csv"), vrec.to_csv(a.stride).into_bytes()));
                    snapshots(&vrec, "_v", &mut files);
                    Ok(PathOutput { files, blowup: None })
                }
                Err(navsto::Error::BlowUp { step }) => Ok(PathOutput { files, blowup: Some(step) }),
                Err(e) => Err(e.into()),
            }
        }
        Mode::Linearized => {
            let mut st = Stepper::new(&quiet)?;
            let keep = Keep {
                snapshot_stride: quiet.snapshot_stride,
                states: true,
            };
            let (rec, states) = integrate(&mut st, &cfg.initial_state(), &[], keep, |s, j| s.noise(p, j));
            files.push((format!("path_{p}.csv"), rec.to_csv(a.stride).into_bytes()));
            snapshots(&rec, "", &mut files);
            if rec.blowup.is_some() {
                return Ok(PathOutput { files, blowup: rec.blowup });
            }
            let h = cosine_mode(cfg.n, WaveVector::new(1, 0, 0))?;
            match linearized_flow(&states, &h, cfg) {
                Ok(ys) => {
                    let mut csv = String::from("t,h_norm,w_norm_sq\n");
                    for (j, y) in ys.iter().enumerate().step_by(a.stride.max(1)) {
                        csv.push_str(&format!("{:e},{:e},{:e}\n", j as f64 * cfg.dt, y.norm_h(), st.w_norm_sq(y)));
                    }
                    files.push((format!("path_{p}_derivative.csv"), csv.into_bytes()));
                    Ok(PathOutput { files, blowup: None })
                }
                Err(navsto::Error::BlowUp { step }) => Ok(PathOutput { files, blowup: Some(step) }),
                Err(e) => Err(e.into()),
            }
        }
        _ => {
            let rec = simulate_path(&quiet, p)?;
            files.push((format!("path_{p}.csv"), rec.to_csv(a.stride).into_bytes()));
            snapshots(&rec, "", &mut files);
            Ok(PathOutput { files, blowup: rec.blowup })
        }
    }
}

pub fn simulate(cfg: &SimConfig, seeds: Range<u64>, a: &SimulateArgs) -> Result<Outcome> {
    if a.stride == 0 {
        bail!("--stride must be positive");
    }
    let outputs: Vec<PathOutput> = seeds
        .clone()
        .into_par_iter()
        .map(|p| simulate_one(cfg, p, a))
        .collect::<Result<_>>()?;
    let census: Vec<(u64, usize)> = seeds
        .clone()
        .zip(&outputs)
        .filter_map(|(p, o)| o.blowup.map(|s| (p, s)))
        .collect();
    let mut out = Outcome::new(
        if census.is_empty() { Verdict::Pass } else { Verdict::Inconclusive },
        format!(
            "simulate: {} paths, N = {}, mode {}, scheme {}, {} steps of {}, {} blow-ups\n",
            seeds.end - seeds.start,
            cfg.n,
            cfg.mode,
            cfg.scheme,
            cfg.steps(),
            cfg.dt,
            census.len()
        ),
    );
    for o in outputs {
        out.artifacts.extend(o.files);
    }
    if !census.is_empty() {
        out.add("blowups.csv", census_csv(&census));
    }
    Ok(out)
}

// ------------------------------------------------------------ martingales

#[derive(Args, Debug, Serialize)]
pub struct MartingaleArgs {
    /// Checkpoint steps (default: four equally spaced even steps).
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
    /// Skip the paired `2 dt` ensemble and its bias correction.
    #[arg(long)]
    pub no_richardson: bool,
    /// Energy index `n` (verify-energy; default every tracked index).
    #[arg(long)]
    pub n: Option<usize>,
}

fn default_checkpoints(steps: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = (1..=4).map(|k| (k * steps / 4) & !1).filter(|&j| j > 0).collect();
    cps.dedup();
    cps
}

struct Ensembles {
    fine: Ensemble,
    coarse: Option<Ensemble>,
    checkpoints: Vec<usize>,
}

fn ensembles(
    cfg: &SimConfig,
    seeds: Range<u64>,
    a: &MartingaleArgs,
    phis: &[navsto::verifier::TestFunction],
) -> Result<Ensembles> {
    let u0 = cfg.initial_state();
    let fine = run_ensemble(cfg, seeds.clone(), &u0, phis)?;
    let coarse = if a.no_richardson {
        None
    } else {
        Some(run_coarse_ensemble(cfg, seeds, &u0, phis)?)
    };
    let checkpoints = if a.checkpoints.is_empty() {
        default_checkpoints(cfg.steps())
    } else {
        a.checkpoints.clone()
    };
    Ok(Ensembles {
        fine,
        coarse,
        checkpoints,
    })
}

impl Ensembles {
    fn input(&self) -> MartingaleInput<'_> {
        MartingaleInput {
            fine: &self.fine,
            coarse: self.coarse.as_ref(),
        }
    }

    fn census(&self) -> Vec<(u64, usize)> {
        census(&self.fine, self.coarse.as_ref())
    }
}

pub fn verify_mp2(cfg: &SimConfig, seeds: Range<u64>, a: &MartingaleArgs) -> Result<Outcome> {
    let phis = standard_test_functions(cfg.n, &cfg.covariance()?)?;
    let ens = ensembles(cfg, seeds, a, &phis)?;
    let result = phis
        .iter()
        .enumerate()
        .map(|(i, phi)| test_mp2_martingale(ens.input(), i, phi, &ens.checkpoints))
        .collect::<navsto::Result<Vec<_>>>()
        .map_err(anyhow::Error::from)
        .and_then(|r| reports_outcome(&r, Verdict::Pass));
    with_census(result, &ens.census())
}

pub fn verify_energy(cfg: &SimConfig, seeds: Range<u64>, a: &MartingaleArgs) -> Result<Outcome> {
    let indices: Vec<usize> = match a.n {
        Some(n) if n == 0 || n > cfg.n_max => bail!("--n {n} outside 1..={} (n_max)", cfg.n_max),
        Some(n) => vec![n],
        None => (1..=cfg.n_max).collect(),
    };
    let ens = ensembles(cfg, seeds, a, &[])?;
    let result = indices
        .iter()
        .map(|&n| test_energy_supermartingale(ens.input(), n, &ens.checkpoints))
        .collect::<navsto::Result<Vec<_>>>()
        .map_err(anyhow::Error::from)
        .and_then(|r| reports_outcome(&r, Verdict::Pass));
    with_census(result, &ens.census())
}

#[derive(Args, Debug, Serialize)]
pub struct DoobArgs {
    /// Energy index `n`.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Interval start (step).
    #[arg(long, default_value_t = 0)]
    pub from: usize,
    /// Interval end (step; default the horizon).
    #[arg(long)]
    pub to: Option<usize>,
    /// Levels `lambda` (default: eight levels scaled to the data).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
}

pub fn verify_doob(cfg: &SimConfig, seeds: Range<u64>, a: &DoobArgs) -> Result<Outcome> {
    let ens = run_ensemble(cfg, seeds, &cfg.initial_state(), &[])?;
    let to = a.to.unwrap_or(cfg.steps());
    let lambdas = (!a.lambdas.is_empty()).then_some(a.lambdas.as_slice());
    let result = test_doob(&ens, a.n, a.from, to, lambdas)
        .map_err(anyhow::Error::from)
        .and_then(|r| reports_outcome(&[r], Verdict::Pass));
    with_census(result, &census(&ens, None))
}

// ------------------------------------------------------------- weak-strong

#[derive(Args, Debug, Serialize)]
pub struct WeakStrongArgs {
    /// Stopping level `R` on `|u|_W^2` (default: a quantile of a pilot run).
    #[arg(long)]
    pub level: Option<f64>,
    /// Quantile of the pilot's `sup |u|_W^2` used as `R`.
    #[arg(long, default_value_t = 0.6)]
    pub level_quantile: f64,
    /// First path id of the pilot (as many paths as the test).
    #[arg(long, default_value_t = 1_000_000)]
    pub pilot_start: u64,
    /// Cut-off level of the second run (default `R`; anything else is a
    /// deliberately mismatched pairing).
    #[arg(long)]
    pub chi_level: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub min_crossings: usize,
}

/// `q`-quantile of `sup_t |u|_W^2` over full-mode paths.
fn sup_w_quantile(cfg: &SimConfig, paths: Range<u64>, u0: &SpectralField, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        bail!("quantile {q} outside [0, 1]");
    }
    let full = SimConfig {
        mode: Mode::Full,
        ..cfg.clone()
    };
    let ens = run_ensemble(&full, paths, u0, &[])?;
    let mut sups: Vec<f64> = ens
        .complete()
        .map(|r| r.w_sq.iter().copied().fold(0.0, f64::max))
        .collect();
    if sups.is_empty() {
        bail!("every pilot path blew up");
    }
    sups.sort_by(f64::total_cmp);
    Ok(sups[((sups.len() - 1) as f64 * q).round() as usize])
}

pub fn verify_weak_strong(cfg: &SimConfig, seeds: Range<u64>, a: &WeakStrongArgs) -> Result<Outcome> {
    let u0 = cfg.initial_state();
    let big_r = match a.level {
        Some(r) => r,
        None => {
            let n = seeds.end - seeds.start;
            sup_w_quantile(cfg, a.pilot_start..a.pilot_start + n, &u0, a.level_quantile)?
        }
    };
    let chi = a.chi_level.unwrap_or(big_r);
    let mut r = test_weak_strong_with(cfg, seeds, big_r, chi, &u0, a.min_crossings)?;
    r.param("level_from_pilot", a.level.is_none());
    reports_outcome(&[r], Verdict::Pass)
}

// ------------------------------------------------------------------- bel

#[derive(Args, Debug, Serialize)]
pub struct BelArgs {
    /// Evaluation time.
    #[arg(long, default_value_t = 0.1)]
    pub time: f64,
    /// `|x|_W^2` of the random starting point.
    #[arg(long, default_value_t = 100.0)]
    pub x_w_sq: f64,
    #[arg(long, default_value_t = 11)]
    pub x_seed: u64,
    /// Observable: `projection` (onto the direction) or `energy`.
    #[arg(long, default_value = "projection")]
    pub psi: String,
    /// Clip level of the observable (default ten times its pilot 99th
    /// percentile).
    #[arg(long)]
    pub clip: Option<f64>,
    /// Finite-difference step relative to `|x|_H`.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_rel: f64,
    /// Cut-off level `R` (default: a quantile of a pilot run from `x`).
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub level_quantile: f64,
    #[arg(long, default_value_t = 200)]
    pub pilot_paths: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub pilot_start: u64,
    /// Use twice the correct weight (a deliberately wrong estimator).
    #[arg(long)]
    pub doubled: bool,
}

pub fn bel_probe(cfg: &SimConfig, seeds: Range<u64>, a: &BelArgs) -> Result<Outcome> {
    let n = cfg.n;
    let weights = if a.doubled { BelWeights::Doubled } else { BelWeights::Correct };
    let phi = cosine_mode(n, WaveVector::new(1, 0, 0))?;

    // linear problem: the estimator's exact expectation
    let mut h_lin = phi.clone();
    h_lin.axpy(0.5, &cosine_mode(n, WaveVector::new(1, 1, 0))?);
    let (est, exact) = bel_linear_exact(&h_lin, &phi, a.time, cfg, weights)?;

    let probe = SimConfig {
        horizon: a.time,
        ..cfg.clone()
    };
    let st = Stepper::new(&probe)?;
    let x = random_divfree_field(n, &Profile::power_law(1.0, 3.0), a.x_seed);
    let x = x.scaled((a.x_w_sq / st.w_norm_sq(&x)).sqrt());
    let pilot = bel_pilot(
        &probe,
        &x,
        &phi,
        a.time,
        a.pilot_start..a.pilot_start + a.pilot_paths,
        a.level_quantile,
    )?;
    let big_r = a.level.unwrap_or(pilot.sup_w_sq);
    let cut = SimConfig {
        cutoff: big_r,
        mode: Mode::Cutoff,
        ..probe
    };
    let psi = match a.psi.as_str() {
        "projection" => Psi::Projection {
            phi: phi.clone(),
            clip: a.clip.unwrap_or(pilot.clip(false)),
        },
        "energy" => Psi::Energy {
            clip: a.clip.unwrap_or(pilot.clip(true)),
        },
        other => bail!("unknown observable `{other}` (expected projection or energy)"),
    };
    let eps = a.eps_rel * x.norm_h();
    let mut out = bel_gradient_probe(&x, &phi, &psi, a.time, seeds, &cut, eps, weights)?;
    let tol = 1e-6 * exact.abs().max(1.0);
    out.report
        .param("linear_estimate", est)
        .param("linear_exact", exact)
        .param("x_w_sq", a.x_w_sq)
        .param("level_from_pilot", a.level.is_none())
        .param("pilot_projection_p99", pilot.projection_p99)
        .param("pilot_energy_p99", pilot.energy_p99);
    out.report.check("linear_exact_residual", (est - exact).abs(), 0.0, 0.0, tol);
    reports_outcome(&[out.report], Verdict::Pass)
}

// ------------------------------------------------------------------ sweep

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// `alpha` or `alpha:eps` entries.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5:0.01,0.75,1")]
    pub alphas: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub resolutions: Vec<usize>,
    /// Spectral decay exponent of the random fields.
    #[arg(long, default_value_t = 6.0)]
    pub exponent: f64,
    /// Admissible relative spread of the per-resolution maxima.
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
    /// Exponent of the negative-norm diagnostic.
    #[arg(long, default_value_t = 1.75)]
    pub gamma: f64,
    #[arg(long)]
    pub no_gamma: bool,
    /// Random pairs for the endpoint fit (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub endpoint_samples: u64,
    #[arg(long, default_value_t = 1)]
    pub endpoint_m: u32,
    #[arg(long, default_value_t = 8)]
    pub endpoint_resolution: usize,
    #[arg(long, default_value_t = 2.0)]
    pub endpoint_safety: f64,
}

fn parse_alpha(s: &str) -> Result<(f64, Option<f64>)> {
    let parse = |v: &str| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}` in `{s}`"));
    Ok(match s.split_once(':') {
        Some((a, e)) => (parse(a)?, Some(parse(e)?)),
        None => (parse(s)?, None),
    })
}

pub fn sweep(seeds: Range<u64>, a: &SweepArgs) -> Result<Outcome> {
    let spec = SweepSpec {
        alphas: a.alphas.iter().map(|s| parse_alpha(s)).collect::<Result<_>>()?,
        resolutions: a.resolutions.clone(),
        seeds,
        profile: Profile::power_law(1.0, a.exponent),
        tolerance: a.tolerance,
        gamma: (!a.no_gamma).then_some(a.gamma),
    };
    let (rows, cells, mut report) = inequality_sweep(&spec)?;
    let fit = if a.endpoint_samples > 0 {
        let fit = endpoint_inequality(a.endpoint_resolution, a.endpoint_m, a.endpoint_samples, a.endpoint_safety)?;
        report.param("endpoint_fit", &fit);
        report.check("endpoint_violations", fit.violations as f64, 0.0, 0.0, 0.0);
        Some(fit)
    } else {
        None
    };
    let mut out = reports_outcome(&[report], Verdict::Pass)?;
    out.add("rows.csv", sweep_csv(&rows));
    out.add("cells.json", serde_json::to_string_pretty(&cells)?);
    if let Some(fit) = fit {
        out.add("endpoint.json", serde_json::to_string_pretty(&fit)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- control

#[derive(Args, Debug, Serialize)]
pub struct ControlArgs {
    /// `|x|_W^2` of the start.
    #[arg(long, default_value_t = 20.0)]
    pub x_w_sq: f64,
    /// `|y|_W^2` of the target.
    #[arg(long, default_value_t = 24.0)]
    pub y_w_sq: f64,
    #[arg(long, default_value_t = 1)]
    pub x_seed: u64,
    #[arg(long, default_value_t = 2)]
    pub y_seed: u64,
    /// Cut-off level `R`.
    #[arg(long, default_value_t = 50.0)]
    pub level: f64,
    /// Control horizon (default the configured horizon).
    #[arg(long)]
    pub control_horizon: Option<f64>,
    /// Perturbation sizes of the continuity probe.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 7)]
    pub direction_seed: u64,
}

pub fn control_steer(cfg: &SimConfig, a: &ControlArgs) -> Result<Outcome> {
    let horizon = a.control_horizon.unwrap_or(cfg.horizon);
    let cfg = SimConfig {
        horizon,
        ..cfg.clone()
    };
    let st = Stepper::new(&cfg)?;
    let scale = |f: SpectralField, target: f64| f.scaled((target / st.w_norm_sq(&f)).sqrt());
    let x = scale(random_divfree_field(cfg.n, &Profile::power_law(1.0, 3.0), a.x_seed), a.x_w_sq);
    let y = scale(random_divfree_field(cfg.n, &Profile::power_law(1.0, 3.0), a.y_seed), a.y_w_sq);
    let ctrl = build_control(&x, &y, horizon, a.level, &cfg)?;
    let end_err = st.w_norm_sq(&(ctrl.states.last().expect("non-empty") - &y)).sqrt();
    let (_, replay) = solve_controlled(&x, &ctrl.increments, a.level, &cfg)?;
    let replay_err = st.w_norm_sq(&(replay.last().expect("non-empty") - &y)).sqrt();
    let replay_sup = replay.iter().map(|u| st.w_norm_sq(u)).fold(0.0, f64::max);
    let devs = perturbed_endpoints(&x, &ctrl, a.level, &cfg, &a.deltas, a.direction_seed)?;

    let mut r = TestReport::new("control steering");
    r.param("resolution", cfg.n)
        .param("dt", cfg.dt)
        .param("horizon", horizon)
        .param("level", a.level)
        .param("t_star", ctrl.t_star)
        .param("deviations", &devs);
    r.check("endpoint_error", end_err, 0.0, 0.0, 1e-8);
    r.check("replay_error", replay_err, 0.0, 0.0, 1e-8);
    r.check("sup_w_sq", ctrl.sup_w_sq, 0.0, f64::NEG_INFINITY, a.level);
    r.check("replay_sup_w_sq", replay_sup, 0.0, f64::NEG_INFINITY, a.level);
    // continuity: roughly linear response to the control perturbation
    for w in devs.windows(2) {
        let expected = w[0].0 / w[1].0;
        r.check(
            format!("deviation_ratio({:e}/{:e})", w[0].0, w[1].0),
            w[0].1 / w[1].1,
            0.0,
            expected / 2.0,
            expected * 2.0,
        );
    }

    let w = ctrl.w();
    let mut path = String::from("t,w_norm_sq,control_w_norm\n");
    for (j, (u, wj)) in ctrl.states.iter().zip(&w).enumerate() {
        path.push_str(&format!("{:e},{:e},{:e}\n", j as f64 * cfg.dt, st.w_norm_sq(u), st.w_norm_sq(wj).sqrt()));
    }
    let mut dev_csv = String::from("delta,endpoint_deviation\n");
    for (d, e) in &devs {
        dev_csv.push_str(&format!("{d:e},{e:e}\n"));
    }
    let mut out = reports_outcome(&[r], Verdict::Pass)?;
    out.add("path.csv", path);
    out.add("deviations.csv", dev_csv);
    Ok(out)
}

// ---------------------------------------------------------------- select

#[derive(Args, Debug, Serialize)]
pub struct SelectArgs {
    /// Initial state of the cascade.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub start: f64,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Branch times on the uniform grid.
    #[arg(long, default_value_t = 200)]
    pub branches: usize,
    /// Criteria `lambda:c*f` in cascade order (default: the built-in menu).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub criteria: Vec<String>,
    /// Starting states of the semiflow check.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.25,-0.25,1,-2")]
    pub states: Vec<f64>,
    /// Times `t` and `r` of the semiflow check.
    #[arg(long, value_delimiter = ',', default_value = "0,0.001,0.002,0.01,0.1,1,5")]
    pub times: Vec<f64>,
    /// CSV row every this many grid steps.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// Largest admissible semiflow defect.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
}

pub fn select_demo(a: &SelectArgs) -> Result<Outcome> {
    let criteria: Vec<SelectionCriterion> = if a.criteria.is_empty() {
        default_menu()
    } else {
        a.criteria
            .iter()
            .map(|s| s.parse().with_context(|| format!("criterion `{s}`")))
            .collect::<Result<_>>()?
    };
    let map = SelectionMap::new(a.horizon, a.dt, a.branches, criteria);
    let funnel = map.funnel(a.start)?;
    let sel = select(&funnel, &map.criteria)?;
    let unseparated = unseparated_pairs(&funnel, &map.criteria);
    let (defect, entries) = check_semiflow(|x| map.apply(x), &a.states, &a.times)?;

    let mut r = TestReport::new("selection semiflow");
    r.param("start", a.start)
        .param("horizon", a.horizon)
        .param("dt", a.dt)
        .param("funnel_size", funnel.len())
        .param("criteria", map.criteria.iter().map(|c| c.to_string()).collect::<Vec<_>>())
        .param("selected", json!({"s": sel.path.s, "sign": sel.path.sign.to_string()}))
        .param("stages_used", sel.stages.len())
        .param("unseparated_pairs", unseparated.len());
    r.check("semiflow_defect", defect, 0.0, 0.0, a.tolerance);

    let mut out = reports_outcome(&[r], Verdict::Pass)?;
    out.add("funnel.csv", funnel_csv(&funnel, a.stride));
    out.add("stages.csv", stages_csv(&funnel, &sel.stages));
    out.add("selected.csv", path_csv(&sel.path, a.stride));
    out.add("semiflow.csv", semiflow_csv(&entries));
    Ok(out)
}
