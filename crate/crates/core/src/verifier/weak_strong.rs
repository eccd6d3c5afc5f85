use rayon::prelude::*;
use std::ops::Range;

use super::TestReport;
use crate::dynamics::{first_crossing, integrate, Keep, Mode, SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::spectral::SpectralField;

struct Pair {
    tau_full: Option<usize>,
    tau_cut: Option<usize>,
    /// Largest coefficient difference strictly before the common stopping step.
    discrepancy: f64,
    identical: bool,
    /// Paths differ somewhere after the stopping step.
    diverged_later: bool,
}

fn bitwise_equal(a: &SpectralField, b: &SpectralField) -> bool {
    a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| {
        x.iter()
            .zip(y)
            .all(|(p, q)| p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits())
    })
}

fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

/// Full-mode against cut-off-mode paths on shared noise, for every path id.
///
/// `tau_level` defines the stopping time `|u|_W^2 >= R`; `chi_level` is the
/// cut-off level of the second run (equal to `tau_level` for the real test).
pub fn test_weak_strong_with(
    cfg: &SimConfig,
    paths: Range<u64>,
    tau_level: f64,
    chi_level: f64,
    u0: &SpectralField,
    min_crossings: usize,
) -> Result<TestReport> {
    let full = SimConfig {
        mode: Mode::Full,
        cutoff: tau_level,
        ..cfg.clone()
    };
    let cut = SimConfig {
        mode: Mode::Cutoff,
        cutoff: chi_level,
        ..cfg.clone()
    };
    if full.seed != cut.seed || full.dt != cut.dt || full.n != cut.n {
        return Err(Error::ConfigMismatch("paired runs differ".into()));
    }
    Stepper::new(&full)?;
    Stepper::new(&cut)?;
    let keep = Keep {
        snapshot_stride: 0,
        states: true,
    };
    let pairs: Vec<Pair> = paths
        .clone()
        .into_par_iter()
        .map_init(
            || (Stepper::new(&full).unwrap(), Stepper::new(&cut).unwrap()),
            |(sf, sc), p| {
                let (rf, uf) = integrate(sf, u0, &[], keep, |s, j| s.noise(p, j));
                let (rc, uc) = integrate(sc, u0, &[], keep, |s, j| s.noise(p, j));
                let tau_full = first_crossing(&rf.w_sq, tau_level);
                let tau_cut = first_crossing(&rc.w_sq, tau_level);
                let upto = tau_full.unwrap_or(uf.len()).min(tau_cut.unwrap_or(uc.len())).min(uf.len()).min(uc.len());
                let identical = (0..upto).all(|j| bitwise_equal(&uf[j], &uc[j]));
                let discrepancy = (0..upto).map(|j| max_diff(&uf[j], &uc[j])).fold(0.0, f64::max);
                let diverged_later = uf.iter().zip(&uc).skip(upto).any(|(a, b)| !bitwise_equal(a, b));
                Pair {
                    tau_full,
                    tau_cut,
                    discrepancy,
                    identical,
                    diverged_later,
                }
            },
        )
        .collect();

    let mut report = TestReport::new("weak-strong");
    report
        .param("resolution", cfg.n)
        .param("dt", cfg.dt)
        .param("scheme", cfg.scheme)
        .param("seed", cfg.seed)
        .param("paths", [paths.start, paths.end])
        .param("tau_level", tau_level)
        .param("chi_level", chi_level);
    let crossings = pairs.iter().filter(|p| p.tau_full.is_some()).count();
    let mismatched = pairs.iter().filter(|p| p.tau_full != p.tau_cut).count();
    let not_identical = pairs.iter().filter(|p| !p.identical).count();
    let worst = pairs.iter().map(|p| p.discrepancy).fold(0.0, f64::max);
    let diverged = pairs.iter().filter(|p| p.diverged_later).count();
    report.check("max_discrepancy_before_tau", worst, 0.0, 0.0, 0.0);
    report.check("pairs_not_bitwise_identical", not_identical as f64, 0.0, 0.0, 0.0);
    report.check("tau_mismatches", mismatched as f64, 0.0, 0.0, 0.0);
    report.param("crossings", crossings).param("diverged_after_tau", diverged);
    if crossings < min_crossings {
        report.inconclusive(format!("only {crossings} paths reached R (need {min_crossings})"));
    }
    Ok(report)
}

/// Weak-strong identity: with the cut-off at the stopping level, the two runs
/// agree bitwise before `tau_R` and detect the same `tau_R`.
pub fn test_weak_strong(
    cfg: &SimConfig,
    paths: Range<u64>,
    big_r: f64,
    u0: &SpectralField,
    min_crossings: usize,
) -> Result<TestReport> {
    test_weak_strong_with(cfg, paths, big_r, big_r, u0, min_crossings)
}
