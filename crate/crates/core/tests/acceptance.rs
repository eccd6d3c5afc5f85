//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! `ACCEPTANCE_ONLY=3,7` restricts the run to the listed criteria. Reports
//! are written to `<target tmp>/acceptance/`.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use navsto::dynamics::{
    build_control, perturbed_endpoints, run_coarse_ensemble, run_ensemble, solve_controlled, Mode, SimConfig, Stepper,
};
use navsto::nonlinearity::{b_direct, b_pseudospectral, PseudoSpectral};
use navsto::selection::{
    argmax_set, check_semiflow, default_menu, j_functional, path_csv, select, semiflow_csv, stages_csv,
    unseparated_pairs, BranchPath, SelectionCriterion, SelectionMap, Sign,
};
use navsto::spectral::{
    from_physical, leray_project, modes, random_divfree_field, to_physical, Profile, RawField,
};
use navsto::verifier::{
    bel_gradient_probe, bel_linear_exact, bel_pilot, cosine_mode, inequality_sweep, standard_test_functions, test_doob,
    test_energy_supermartingale, test_mp2_martingale, test_weak_strong, test_weak_strong_with, BelWeights,
    MartingaleInput, Psi, SweepSpec,
};
use navsto::{Complex64, SpectralField, WaveVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn out_dir() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&d).expect("artifact dir");
    d
}

fn save(name: &str, text: &str) {
    fs::write(out_dir().join(name), text).expect("write artifact");
}

fn rel(a: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        a.abs()
    } else {
        a.abs() / scale
    }
}

fn max_coeff_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    (a - b).norm_h()
}

/// Physical value at `x` by the explicit sum over both `k` and `-k`; returns
/// the largest imaginary part seen and the real vector.
fn pointwise(u: &SpectralField, x: [f64; 3]) -> ([f64; 3], f64) {
    let mut s = [Complex64::new(0.0, 0.0); 3];
    for k in modes(u.resolution()) {
        for kk in [k, WaveVector::new(-k.0[0], -k.0[1], -k.0[2])] {
            let c = u.get(kk);
            let ph = 2.0 * PI * (kk.0[0] as f64 * x[0] + kk.0[1] as f64 * x[1] + kk.0[2] as f64 * x[2]);
            let e = Complex64::new(ph.cos(), ph.sin());
            for i in 0..3 {
                s[i] += c[i] * e;
            }
        }
    }
    ([s[0].re, s[1].re, s[2].re], s.iter().map(|z| z.im.abs()).fold(0.0, f64::max))
}

fn criterion_1() -> Outcome {
    let mut worst = [0.0f64; 6];
    let names = ["divergence", "reality", "leray", "parseval", "skew", "roundtrip"];
    for n in [4usize, 6, 8] {
        let mut ps = PseudoSpectral::new(n, 1.5).unwrap();
        let m = 2 * n + 2;
        for s in 0..100u64 {
            let u = random_divfree_field(n, &Profile::power_law(1.0, 1.5), 2 * s);
            let v = random_divfree_field(n, &Profile::power_law(1.0, 2.5), 2 * s + 1);
            let b = ps.b_uv(&u, &v);
            let scale = u.norm_h();
            worst[0] = worst[0].max(u.divergence_residual()).max(b.divergence_residual());

            // explicit two-sided sum at a few points: imaginary part and grid values
            if s % 10 == 0 {
                let phys = to_physical(&u, m).unwrap();
                for (p, idx) in [(0usize, 0usize), (1, 1), (3, 2), (m + 2, 5)] {
                    let i = (p * 7 + idx) % phys.data[0].len();
                    let (ii, jj, ll) = (i / (m * m), (i / m) % m, i % m);
                    let x = [ii as f64 / m as f64, jj as f64 / m as f64, ll as f64 / m as f64];
                    let (val, im) = pointwise(&u, x);
                    let diff = (0..3).map(|c| (val[c] - phys.data[c][i]).abs()).fold(0.0, f64::max);
                    worst[1] = worst[1].max(rel(im, scale)).max(rel(diff, scale));
                }
            }

            // Leray: fixed on divergence-free fields, idempotent on raw ones
            worst[2] = worst[2].max(rel(max_coeff_diff(&leray_project(u.clone().into_raw()), &u), scale));
            let raw = RawField::from_fn(n, |k| {
                let c = u.get(k);
                let g = Complex64::new((k.0[0] + 2 * k.0[1]) as f64, (s as f64 + k.0[2] as f64).sin());
                [c[0] + g * k.0[0] as f64, c[1] + g * k.0[1] as f64, c[2] + g * k.0[2] as f64]
            });
            let p1 = leray_project(raw);
            let p2 = leray_project(p1.clone().into_raw());
            worst[2] = worst[2].max(rel(max_coeff_diff(&p1, &p2), p1.norm_h()));

            let phys = to_physical(&u, m).unwrap();
            worst[3] = worst[3].max(rel(phys.lp_norm(2.0).powi(2) - u.norm_h_sq(), u.norm_h_sq()));
            worst[4] = worst[4].max(rel(b.inner(&v), b.norm_h() * v.norm_h()));
            worst[5] = worst[5].max(rel(max_coeff_diff(&from_physical(&phys, n).unwrap(), &u), scale));
        }
    }
    let pass = worst.iter().all(|w| *w <= 1e-12);
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome { pass, detail }
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for n in [4usize, 6, 8] {
        for s in 0..50u64 {
            let u = random_divfree_field(n, &Profile::power_law(1.0, 1.0 + (s % 3) as f64), 1000 + 2 * s);
            let v = random_divfree_field(n, &Profile::power_law(1.0, 2.0), 1001 + 2 * s);
            let d = b_direct(&u, &v).unwrap();
            let p = b_pseudospectral(&u, &v).unwrap();
            worst = worst.max(rel(max_coeff_diff(&d, &p), d.norm_h()));
            pairs += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("{pairs} pairs, max relative difference {worst:.2e}"),
    }
}

/// Criteria 3-5 share one ensemble.
fn criteria_3_to_5(run: &[usize]) -> Vec<(usize, Outcome)> {
    let cfg = SimConfig::default();
    let cov = cfg.covariance().unwrap();
    let phis = standard_test_functions(cfg.n, &cov).unwrap();
    let u0 = SpectralField::zeros(cfg.n);
    let m = 10_000;
    let fine = run_ensemble(&cfg, 0..m, &u0, &phis).unwrap();
    let coarse = run_coarse_ensemble(&cfg, 0..m, &u0, &phis).unwrap();
    let input = MartingaleInput {
        fine: &fine,
        coarse: Some(&coarse),
    };
    let checkpoints = [8, 16, 24, 32];
    let mut out = Vec::new();

    if run.contains(&3) {
        let control_cfg = SimConfig {
            noise_scale: 1.5,
            ..cfg.clone()
        };
        let control = run_ensemble(&control_cfg, 0..2000, &u0, &phis).unwrap();
        let mut lines = Vec::new();
        let mut pass = true;
        for (i, phi) in phis.iter().enumerate() {
            let mut r = test_mp2_martingale(input, i, phi, &checkpoints).unwrap();
            let c = test_mp2_martingale(
                MartingaleInput {
                    fine: &control,
                    coarse: None,
                },
                i,
                phi,
                &checkpoints,
            )
            .unwrap();
            let var_failed = c.failed_checks().iter().any(|l| l.starts_with("var_ratio"));
            r.negative_control("noise x1.5", &c);
            pass &= r.passed() && var_failed;
            save(&format!("3_mp2_{i}.json"), &r.to_json());
            lines.push(format!(
                "{}: {} ({} checks), control fails var_ratio: {var_failed}",
                phi.name,
                r.verdict,
                r.labels.len()
            ));
        }
        out.push((
            3,
            Outcome {
                pass,
                detail: lines.join("; "),
            },
        ));
    }
    if run.contains(&4) {
        let r1 = test_energy_supermartingale(input, 1, &checkpoints).unwrap();
        let r2 = test_energy_supermartingale(input, 2, &checkpoints).unwrap();
        save("4_energy_1.json", &r1.to_json());
        save("4_energy_2.json", &r2.to_json());
        out.push((
            4,
            Outcome {
                pass: r1.passed() && r2.passed(),
                detail: format!("E^1 {} ({} checks), E^2 {} ({} checks)", r1.verdict, r1.labels.len(), r2.verdict, r2.labels.len()),
            },
        ));
    }
    if run.contains(&5) {
        let mut r = test_doob(&fine, 1, 0, cfg.steps(), None).unwrap();
        let control_cfg = SimConfig {
            noise_scale: 2.0,
            ..cfg.clone()
        };
        let control = run_ensemble(&control_cfg, 0..2000, &u0, &[]).unwrap();
        r.negative_control("noise x2", &test_doob(&control, 1, 0, cfg.steps(), None).unwrap());
        save("5_doob.json", &r.to_json());
        let slack = r
            .estimates
            .iter()
            .zip(&r.band)
            .map(|(e, b)| e / b[1])
            .fold(0.0, f64::max);
        out.push((
            5,
            Outcome {
                pass: r.passed(),
                detail: format!("{} levels, max lhs/bound {slack:.3}, control {}", r.labels.len(), r.controls[0].observed),
            },
        ));
    }
    out
}

fn sup_w_quantile(cfg: &SimConfig, paths: std::ops::Range<u64>, u0: &SpectralField, q: f64) -> f64 {
    let ens = run_ensemble(&SimConfig { mode: Mode::Full, ..cfg.clone() }, paths, u0, &[]).unwrap();
    let mut sups: Vec<f64> = ens
        .records
        .iter()
        .map(|r| r.w_sq.iter().copied().fold(0.0, f64::max))
        .collect();
    sups.sort_by(f64::total_cmp);
    sups[((sups.len() - 1) as f64 * q).round() as usize]
}

fn criterion_6() -> Outcome {
    let cfg = SimConfig::default();
    let u0 = SpectralField::zeros(cfg.n);
    // level from a pilot on disjoint path ids
    let big_r = sup_w_quantile(&cfg, 1_000_000..1_000_100, &u0, 0.6);
    let mut r = test_weak_strong(&cfg, 0..100, big_r, &u0, 20).unwrap();
    let control = test_weak_strong_with(&cfg, 0..100, big_r, 0.9 * big_r, &u0, 20).unwrap();
    r.negative_control("cut-off below stopping level", &control);
    save("6_weak_strong.json", &r.to_json());
    Outcome {
        pass: r.passed(),
        detail: format!(
            "R = {big_r:.4e}, crossings {}, diverged after tau {}, control {}",
            r.params["crossings"], r.params["diverged_after_tau"], r.controls[0].observed
        ),
    }
}

fn criterion_7() -> Outcome {
    // linear: exact expectation of the estimator
    let lin_cfg = SimConfig {
        n: 4,
        dt: 0.02,
        horizon: 0.1,
        ..SimConfig::default()
    };
    let phi = cosine_mode(4, WaveVector::new(1, 0, 0)).unwrap();
    let mut h = phi.clone();
    h.axpy(0.5, &cosine_mode(4, WaveVector::new(1, 1, 0)).unwrap());
    let (est, exact) = bel_linear_exact(&h, &phi, 0.1, &lin_cfg, BelWeights::Correct).unwrap();
    let lin_err = (est - exact).abs();

    // nonlinear cut-off chain against common-noise finite differences
    let st = Stepper::new(&lin_cfg).unwrap();
    let x = random_divfree_field(4, &Profile::power_law(1.0, 3.0), 11);
    let x = x.scaled((100.0 / st.w_norm_sq(&x)).sqrt());
    let probe = lin_cfg.clone();
    // cut-off level and clip level from a pilot on disjoint path ids
    let pilot = bel_pilot(&probe, &x, &phi, 0.1, 1_000_000..1_000_200, 0.95).unwrap();
    let big_r = pilot.sup_w_sq;
    let cfg = SimConfig {
        cutoff: big_r,
        mode: Mode::Cutoff,
        ..probe
    };
    let psi = Psi::Projection {
        phi: phi.clone(),
        clip: pilot.clip(false),
    };
    let eps = 1e-4 * x.norm_h();
    let mut out = bel_gradient_probe(&x, &phi, &psi, 0.1, 0..100_000, &cfg, eps, BelWeights::Correct).unwrap();
    let control = bel_gradient_probe(&x, &phi, &psi, 0.1, 0..20_000, &cfg, eps, BelWeights::Doubled).unwrap();
    out.report.negative_control("doubled weight", &control.report);
    out.report.param("linear_estimate", est).param("linear_exact", exact);
    save("7_bel.json", &out.report.to_json());
    Outcome {
        pass: lin_err <= 1e-6 && out.report.passed(),
        detail: format!(
            "linear |est-exact| {lin_err:.1e}; R = {big_r:.3e}, clip {:.2e}, bel {:.5} ± {:.1e}, fd {:.5} ± {:.1e} (linear value {:.5}), control {}",
            pilot.clip(false),
            out.bel,
            out.bel_se,
            out.fd,
            out.fd_se,
            exact / h.inner(&phi),
            out.report.controls[0].observed
        ),
    }
}

fn criterion_8() -> Outcome {
    let spec = SweepSpec::default();
    let (rows, _, r) = inequality_sweep(&spec).unwrap();
    save("8_sweep.json", &r.to_json());
    save("8_sweep.csv", &navsto::nonlinearity::sweep_csv(&rows));
    let spreads = r
        .labels
        .iter()
        .zip(&r.estimates)
        .map(|(l, e)| format!("{} {:.2e}", l.trim_start_matches("spread"), e))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        pass: r.passed(),
        detail: format!("spread across N: {spreads}"),
    }
}

fn criterion_9() -> Outcome {
    let cfg = SimConfig {
        n: 8,
        horizon: 0.05,
        mode: Mode::Deterministic,
        ..SimConfig::default()
    };
    let st = Stepper::new(&cfg).unwrap();
    let big_r = 50.0;
    let scale = |f: SpectralField, target: f64| f.scaled((target / st.w_norm_sq(&f)).sqrt());
    let x = scale(random_divfree_field(8, &Profile::power_law(1.0, 3.0), 1), 20.0);
    let y = scale(random_divfree_field(8, &Profile::power_law(1.0, 3.0), 2), 24.0);
    let ctrl = build_control(&x, &y, cfg.horizon, big_r, &cfg).unwrap();
    let end_err = st.w_norm_sq(&(ctrl.states.last().unwrap() - &y)).sqrt();
    let (_, replay) = solve_controlled(&x, &ctrl.increments, big_r, &cfg).unwrap();
    let replay_err = st.w_norm_sq(&(replay.last().unwrap() - &y)).sqrt();
    let replay_sup = replay.iter().map(|u| st.w_norm_sq(u)).fold(0.0, f64::max);
    let devs = perturbed_endpoints(&x, &ctrl, big_r, &cfg, &[1e-2, 1e-3, 1e-4], 7).unwrap();
    // continuity: deviations shrink with delta, about linearly
    let ratios: Vec<f64> = devs.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let trend = ratios.iter().all(|r| (5.0..=20.0).contains(r));
    Outcome {
        pass: end_err <= 1e-8 && replay_err <= 1e-8 && ctrl.sup_w_sq <= big_r && replay_sup <= big_r && trend,
        detail: format!(
            "endpoint {end_err:.1e}, replay {replay_err:.1e}, sup|u|_W^2 {:.2} <= R {big_r}, T* {:.4}, deviation ratios per decade {:?}",
            ctrl.sup_w_sq,
            ctrl.t_star,
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    }
}

/// Trapezoid rule on the path grid: an independent evaluation of `J`.
fn j_trapezoid(p: &BranchPath, c: &SelectionCriterion) -> f64 {
    let y: Vec<f64> = p
        .x
        .iter()
        .enumerate()
        .map(|(i, &x)| (-c.lambda * i as f64 * p.dt).exp() * c.eval(x))
        .collect();
    p.dt * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

fn criterion_10() -> Outcome {
    let (h, dt) = (20.0, 1e-3);
    let x_first: SelectionCriterion = "1:x".parse().unwrap();
    let mut criteria = vec![x_first];
    criteria.extend(default_menu().into_iter().skip(1));
    let map = SelectionMap::new(h, dt, 200, criteria.clone());
    let funnel = map.funnel(0.0).unwrap();
    let sel = select(&funnel, &map.criteria).unwrap();
    let chosen = (sel.path.sign, sel.path.s);

    // brute force: every stage's argmax agrees with the trapezoid ranking
    let mut brute_ok = true;
    let degenerate = select(&funnel, &["1:0".parse().unwrap(), x_first]).unwrap();
    for st in sel.stages.iter().chain(&degenerate.stages) {
        let brute: Vec<(usize, f64)> = st
            .values
            .iter()
            .map(|&(i, _)| (i, j_trapezoid(&funnel.paths[i], &st.criterion)))
            .collect();
        let best = brute.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        let brute_arg: Vec<usize> = brute.iter().filter(|b| b.1 == best).map(|b| b.0).collect();
        if st.retained.len() == 1 {
            brute_ok &= brute_arg == st.retained;
        } else {
            brute_ok &= st.retained.len() == st.values.len();
        }
    }
    brute_ok &= degenerate.index == sel.index;

    // argmax sets unchanged by positive rescaling
    let mut invariant = true;
    for c in default_menu().iter().chain(std::iter::once(&"1:0".parse().unwrap())) {
        let base: Vec<(usize, f64)> = funnel
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| (i, j_functional(p, c).value))
            .collect();
        let reference = argmax_set(&base);
        for k in [1e-3, 0.5, 7.0, 1e4] {
            let scaled: Vec<(usize, f64)> = funnel
                .paths
                .iter()
                .enumerate()
                .map(|(i, p)| (i, j_functional(p, &c.scaled(k)).value))
                .collect();
            invariant &= argmax_set(&scaled) == reference;
        }
    }

    let unseparated = unseparated_pairs(&funnel, &default_menu()).len();

    let states = [0.0, 0.25, -0.25, 1.0, -2.0];
    let ts = [0.0, 0.001, 0.002, 0.01, 0.1, 1.0, 5.0];
    let (defect, entries) = check_semiflow(|a| map.apply(a), &states, &ts).unwrap();
    // latest-branch selection from zero: not a semiflow
    let last_s = map.s_grid.last().copied().unwrap();
    let latest = |a: f64| -> navsto::Result<BranchPath> {
        if a != 0.0 {
            return map.apply(a);
        }
        let f = map.funnel(0.0)?;
        Ok(f.paths
            .into_iter()
            .find(|p| p.sign == Sign::Plus && (p.s - last_s).abs() < 0.5 * dt)
            .expect("latest branch"))
    };
    let (bad_defect, _) = check_semiflow(latest, &[0.0], &[0.0, 1.0, 10.0]).unwrap();

    save("10_stages.csv", &stages_csv(&funnel, &sel.stages));
    save("10_selected.csv", &path_csv(&sel.path, 100));
    save("10_semiflow.csv", &semiflow_csv(&entries));
    let band = 10.0 * dt * dt;
    Outcome {
        pass: chosen == (Sign::Plus, 0.0)
            && brute_ok
            && invariant
            && unseparated == 0
            && defect <= band
            && bad_defect > band,
        detail: format!(
            "selected {}{} of {} paths; semiflow defect {defect:.1e} (band {band:.0e}); brute-force argmax {brute_ok}; scaling invariance {invariant}; unseparated pairs {unseparated}; latest-branch control defect {bad_defect:.2e}",
            chosen.0,
            chosen.1,
            funnel.len()
        ),
    }
}

fn determinism_artifacts(threads: usize) -> Vec<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let cfg = SimConfig {
            horizon: 0.008,
            ..SimConfig::default()
        };
        let cov = cfg.covariance().unwrap();
        let phis = standard_test_functions(cfg.n, &cov).unwrap();
        let u0 = SpectralField::zeros(cfg.n);
        let ens = run_ensemble(&cfg, 0..40, &u0, &phis).unwrap();
        let coarse = run_coarse_ensemble(&cfg, 0..40, &u0, &phis).unwrap();
        let report = test_mp2_martingale(
            MartingaleInput {
                fine: &ens,
                coarse: Some(&coarse),
            },
            0,
            &phis[0],
            &[4, 8],
        )
        .unwrap();
        let ws = test_weak_strong(&cfg, 0..20, 3e4, &u0, 0).unwrap();
        let mut arts: Vec<String> = ens.records.iter().map(|r| r.to_csv(1)).collect();
        arts.push(report.to_json());
        arts.push(ws.to_json());
        arts
    })
}

fn criterion_11() -> Outcome {
    let a = determinism_artifacts(1);
    let b = determinism_artifacts(3);
    let c = determinism_artifacts(1);
    let same = a == b && a == c;
    let bytes: usize = a.iter().map(|s| s.len()).sum();
    Outcome {
        pass: same,
        detail: format!("{} artifacts, {bytes} bytes, identical across reruns and worker counts: {same}", a.len()),
    }
}

const NAMES: [&str; 11] = [
    "operator identities",
    "pseudo-spectral vs direct B",
    "MP2 martingale suite",
    "energy super-martingales",
    "Doob maximal inequality",
    "weak-strong identity",
    "BEL gradient probe",
    "bilinear estimate sweep",
    "controllability closed loop",
    "selection demo",
    "determinism audit",
];

fn report(i: usize, o: &Outcome, secs: f64, note: &str) {
    println!(
        "[{}] {:>2}. {}: {} ({secs:.1} s{note})",
        if o.pass { "PASS" } else { "FAIL" },
        i,
        NAMES[i - 1],
        o.detail
    );
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let run: Vec<usize> = (1..=11).filter(|i| only.as_ref().map_or(true, |o| o.contains(i))).collect();
    let single: [(usize, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];

    let mut results: Vec<(usize, bool)> = Vec::new();
    for &(i, f) in &single[..2] {
        if run.contains(&i) {
            let t = Instant::now();
            let o = f();
            report(i, &o, t.elapsed().as_secs_f64(), "");
            results.push((i, o.pass));
        }
    }
    if run.iter().any(|i| (3..=5).contains(i)) {
        let t = Instant::now();
        let shared = criteria_3_to_5(&run);
        let secs = t.elapsed().as_secs_f64();
        for (i, o) in shared {
            report(i, &o, secs, ", shared ensemble");
            results.push((i, o.pass));
        }
    }
    for &(i, f) in &single[2..8] {
        if run.contains(&i) {
            let t = Instant::now();
            let o = f();
            report(i, &o, t.elapsed().as_secs_f64(), "");
            results.push((i, o.pass));
        }
    }

    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
