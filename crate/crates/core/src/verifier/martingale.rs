use super::stats::{chi_square_band, corr, mean, mean_se, sample_var};
use super::{TestFunction, TestReport};
use crate::dynamics::{Ensemble, PathRecord};
use crate::error::{Error, Result};

/// An ensemble plus, optionally, the same paths at step `2 dt` for the
/// Richardson bias estimate `|stat(2 dt) - stat(dt)|` added to every band.
#[derive(Clone, Copy, Debug)]
pub struct MartingaleInput<'a> {
    pub fine: &'a Ensemble,
    pub coarse: Option<&'a Ensemble>,
}

struct Paired<'a> {
    fine: Vec<&'a PathRecord>,
    coarse: Option<Vec<&'a PathRecord>>,
    dt: f64,
}

impl<'a> Paired<'a> {
    fn new(input: MartingaleInput<'a>, checkpoints: &[usize], report: &mut TestReport) -> Result<Self> {
        let f = input.fine;
        let steps = f.config.steps();
        if let Some(&bad) = checkpoints.iter().find(|&&j| j == 0 || j > steps) {
            return Err(Error::OutOfRange(format!("checkpoint step {bad} outside 1..={steps}")));
        }
        if let Some(c) = input.coarse {
            if c.records.len() != f.records.len() || (c.config.dt - 2.0 * f.config.dt).abs() > 1e-15 {
                return Err(Error::ConfigMismatch("coarse ensemble must pair the fine one at 2 dt".into()));
            }
            if checkpoints.iter().any(|j| j % 2 == 1) {
                return Err(Error::OutOfRange("checkpoints must be even steps for the 2 dt pairing".into()));
            }
        }
        let ok = |i: usize| {
            f.records[i].blowup.is_none() && input.coarse.map_or(true, |c| c.records[i].blowup.is_none())
        };
        let keep: Vec<usize> = (0..f.records.len()).filter(|&i| ok(i)).collect();
        let lost = f.records.len() - keep.len();
        if lost > 0 {
            report.inconclusive(format!(
                "{lost} of {} paths blew up: {:?}",
                f.records.len(),
                f.blowups()
            ));
        }
        if keep.len() < 3 {
            return Err(Error::OutOfRange("fewer than 3 complete paths".into()));
        }
        Ok(Paired {
            fine: keep.iter().map(|&i| &f.records[i]).collect(),
            coarse: input.coarse.map(|c| keep.iter().map(|&i| &c.records[i]).collect()),
            dt: f.config.dt,
        })
    }

    fn m(&self) -> usize {
        self.fine.len()
    }

    /// Values of `f(record, step)` over the fine ensemble and, if present, the
    /// coarse one at the same time.
    fn columns(&self, j: usize, f: impl Fn(&PathRecord, usize) -> f64) -> (Vec<f64>, Option<Vec<f64>>) {
        let fine = self.fine.iter().map(|r| f(r, j)).collect();
        let coarse = self.coarse.as_ref().map(|c| c.iter().map(|r| f(r, j / 2)).collect());
        (fine, coarse)
    }

    fn pair_columns(
        &self,
        s: usize,
        t: usize,
        f: impl Fn(&PathRecord, usize, usize) -> f64,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let fine = self.fine.iter().map(|r| f(r, s, t)).collect();
        let coarse = self.coarse.as_ref().map(|c| c.iter().map(|r| f(r, s / 2, t / 2)).collect());
        (fine, coarse)
    }
}

/// `|stat(coarse) - stat(fine)|`, zero without a coarse ensemble.
fn bias(stat: impl Fn(&[f64]) -> f64, cols: &(Vec<f64>, Option<Vec<f64>>)) -> f64 {
    cols.1.as_ref().map_or(0.0, |c| (stat(c) - stat(&cols.0)).abs())
}

fn bias2(stat: impl Fn(&[f64], &[f64]) -> f64, a: &(Vec<f64>, Option<Vec<f64>>), b: &(Vec<f64>, Option<Vec<f64>>)) -> f64 {
    match (&a.1, &b.1) {
        (Some(ac), Some(bc)) => (stat(ac, bc) - stat(&a.0, &b.0)).abs(),
        _ => 0.0,
    }
}

fn describe(report: &mut TestReport, input: &MartingaleInput, checkpoints: &[usize]) {
    let cfg = &input.fine.config;
    report
        .param("resolution", cfg.n)
        .param("dt", cfg.dt)
        .param("scheme", cfg.scheme)
        .param("paths", input.fine.records.len())
        .param("first_path", input.fine.paths.start)
        .param("seed", cfg.seed)
        .param("noise_scale", cfg.noise_scale)
        .param("checkpoint_steps", checkpoints)
        .param("richardson", input.coarse.is_some());
}

/// Martingale property of `M^phi` at each checkpoint:
/// (a) `|mean M_t| <= 4 se + bias`;
/// (b) `Var M_t / (t |Q^(1/2) phi|^2)` in the 99% chi-square band widened by
///     the bias;
/// (c) `|corr(M_t - M_s, g(u_s))| <= 4/sqrt(M) + bias` for consecutive
///     checkpoints `s < t` and `g in {|u_s|_H^2, <u_s, phi>}`.
pub fn test_mp2_martingale(
    input: MartingaleInput,
    phi_index: usize,
    phi: &TestFunction,
    checkpoints: &[usize],
) -> Result<TestReport> {
    let mut report = TestReport::new(format!("mp2 {}", phi.name));
    describe(&mut report, &input, checkpoints);
    report.param("q_norm_sq", phi.q_norm_sq);
    if input.fine.records.iter().any(|r| r.mphi.len() <= phi_index) {
        return Err(Error::MissingAccumulator(format!("M^phi #{phi_index} ({})", phi.name)));
    }
    let p = Paired::new(input, checkpoints, &mut report)?;
    let m = p.m();
    let (lo, hi) = chi_square_band(m, 0.99);
    let mphi = |r: &PathRecord, j: usize| r.mphi[phi_index][j];
    for &j in checkpoints {
        let t = j as f64 * p.dt;
        let cols = p.columns(j, mphi);
        let (mu, se) = mean_se(&cols.0);
        let b = bias(mean, &cols);
        report.check(format!("mean_M(t={t:.4})"), mu, se, -4.0 * se - b, 4.0 * se + b);

        let scale = t * phi.q_norm_sq;
        let ratio = |xs: &[f64]| sample_var(xs) / scale;
        let r = ratio(&cols.0);
        let b = bias(ratio, &cols);
        report.check(
            format!("var_ratio(t={t:.4})"),
            r,
            r * (2.0 / (m - 1) as f64).sqrt(),
            lo - b,
            hi + b,
        );
    }
    let se = 1.0 / (m as f64).sqrt();
    for w in checkpoints.windows(2) {
        let (s, t) = (w[0], w[1]);
        let incr = p.pair_columns(s, t, |r, s, t| mphi(r, t) - mphi(r, s));
        let gs: [(&str, Box<dyn Fn(&PathRecord, usize) -> f64>); 2] = [
            ("|u_s|^2", Box::new(|r: &PathRecord, j| r.h_sq[j])),
            ("<u_s,phi>", Box::new(move |r: &PathRecord, j| r.proj[phi_index][j])),
        ];
        for (gname, g) in gs {
            let gcol = p.columns(s, g);
            let c = corr(&incr.0, &gcol.0);
            let b = bias2(corr, &incr, &gcol);
            report.check(
                format!("orth(corr(M_t-M_s,{gname}),s={:.4},t={:.4})", s as f64 * p.dt, t as f64 * p.dt),
                c,
                se,
                -4.0 * se - b,
                4.0 * se + b,
            );
        }
    }
    Ok(report)
}

/// Super-martingale checks of `E^n`: `mean(E^n_t - E^n_s) <= 4 se + bias` for
/// consecutive checkpoints (starting from 0); for `n = 1` also the two-sided
/// `|mean E^1_t| <= 4 se + bias`.
pub fn test_energy_supermartingale(input: MartingaleInput, n: usize, checkpoints: &[usize]) -> Result<TestReport> {
    let mut report = TestReport::new(format!("energy E^{n}"));
    describe(&mut report, &input, checkpoints);
    report.param("n", n);
    if input.fine.records.iter().any(|r| r.n_max() < n) || n == 0 {
        return Err(Error::MissingAccumulator(format!("E^{n}")));
    }
    let p = Paired::new(input, checkpoints, &mut report)?;
    let e = |r: &PathRecord, j: usize| r.energy(n, j).expect("checked above");
    let mut prev = 0;
    for &j in checkpoints {
        let t = j as f64 * p.dt;
        if n == 1 {
            let cols = p.columns(j, e);
            let (mu, se) = mean_se(&cols.0);
            let b = bias(mean, &cols);
            report.check(format!("mean_E1(t={t:.4})"), mu, se, -4.0 * se - b, 4.0 * se + b);
        }
        let cols = p.pair_columns(prev, j, |r, s, t| e(r, t) - e(r, s));
        let (mu, se) = mean_se(&cols.0);
        let b = bias(mean, &cols);
        report.check(
            format!("mean_dE{n}(s={:.4},t={t:.4})", prev as f64 * p.dt),
            mu,
            se,
            f64::NEG_INFINITY,
            4.0 * se + b,
        );
        prev = j;
    }
    Ok(report)
}

/// Maximal inequality for `theta = E^n = alpha - beta` on `[a, b]` (steps):
/// `lambda P[sup alpha >= lambda] <= 2 (E theta_a + E theta_b^- + E beta_b)`
/// up to `4` combined standard errors, for each `lambda`.
///
/// Without an explicit grid, eight levels between a quarter and four times the
/// mean of `sup alpha` are used.
pub fn test_doob(
    ensemble: &Ensemble,
    n: usize,
    a: usize,
    b: usize,
    lambdas: Option<&[f64]>,
) -> Result<TestReport> {
    let mut report = TestReport::new(format!("doob n={n}"));
    let cfg = &ensemble.config;
    report
        .param("resolution", cfg.n)
        .param("dt", cfg.dt)
        .param("paths", ensemble.records.len())
        .param("seed", cfg.seed)
        .param("noise_scale", cfg.noise_scale)
        .param("n", n)
        .param("interval", [a as f64 * cfg.dt, b as f64 * cfg.dt]);
    if a >= b || b > cfg.steps() {
        return Err(Error::OutOfRange(format!("interval steps [{a}, {b}]")));
    }
    if ensemble.records.iter().any(|r| r.n_max() < n) || n == 0 {
        return Err(Error::MissingAccumulator(format!("E^{n}")));
    }
    let recs: Vec<&PathRecord> = ensemble.complete().collect();
    if recs.len() < ensemble.records.len() {
        report.inconclusive(format!("blow-ups: {:?}", ensemble.blowups()));
    }
    let m = recs.len() as f64;
    let sup_alpha: Vec<f64> = recs
        .iter()
        .map(|r| (a..=b).map(|j| r.alpha(n, j).unwrap()).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let rhs_terms: Vec<f64> = recs
        .iter()
        .map(|r| {
            let theta_a = r.energy(n, a).unwrap();
            let theta_b_neg = (-r.energy(n, b).unwrap()).max(0.0);
            2.0 * (theta_a + theta_b_neg + r.beta(n, b).unwrap())
        })
        .collect();
    let (rhs, rhs_se) = mean_se(&rhs_terms);
    let grid: Vec<f64> = match lambdas {
        Some(l) => l.to_vec(),
        None => {
            let s = mean(&sup_alpha);
            (0..8).map(|i| s * 0.25 * 16f64.powf(i as f64 / 7.0)).collect()
        }
    };
    report.param("lambdas", &grid).param("rhs", rhs);
    for lam in grid {
        let p = sup_alpha.iter().filter(|&&x| x >= lam).count() as f64 / m;
        let lhs = lam * p;
        let lhs_se = lam * (p * (1.0 - p) / m).sqrt();
        let se = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
        report.check(format!("lambda_P(lambda={lam:.4e})"), lhs, se, f64::NEG_INFINITY, rhs + 4.0 * se);
    }
    Ok(report)
}
