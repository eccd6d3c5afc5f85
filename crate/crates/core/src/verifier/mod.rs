//! Ensemble statistics with explicit bands and verdicts.
//!
//! Every check is recorded as `(label, estimate, se, band)` and passes when the
//! estimate lies inside the band; a report passes when all of its checks do
//! and every negative control it carries fails as expected.

mod bel;
mod martingale;
mod stats;
mod sweep;
mod weak_strong;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use bel::{bel_gradient_probe, bel_linear_exact, bel_pilot, BelOutcome, BelPilot, BelWeights, Psi};
pub use martingale::{test_doob, test_energy_supermartingale, test_mp2_martingale, MartingaleInput};
pub use stats::{chi_square_band, corr, mean, mean_se, sample_var};
pub use sweep::{endpoint_inequality, inequality_sweep, EndpointFit, SweepSpec};
pub use weak_strong::{test_weak_strong, test_weak_strong_with};

pub use crate::dynamics::TestFunction;
use crate::noise::CovarianceSpec;
use crate::spectral::{polarization, SpectralField, WaveVector};
use crate::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Exit code convention: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Any fail dominates, then inconclusive.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// A corrupted configuration run through the same test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlOutcome {
    pub name: String,
    pub expected: Verdict,
    pub observed: Verdict,
    /// Labels of the failing checks of the control run.
    pub failed_checks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub params: BTreeMap<String, Value>,
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    /// `[lower, upper]`; an open side is serialised as `null`.
    #[serde(with = "band_serde")]
    pub band: Vec<[f64; 2]>,
    pub verdict: Verdict,
    pub controls: Vec<ControlOutcome>,
    /// Reasons for an inconclusive verdict (blow-ups, too few events, ...).
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>) -> Self {
        TestReport {
            name: name.into(),
            params: BTreeMap::new(),
            labels: Vec::new(),
            estimates: Vec::new(),
            se: Vec::new(),
            band: Vec::new(),
            verdict: Verdict::Pass,
            controls: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serialisable parameter"),
        );
        self
    }

    /// Records a check and folds it into the verdict.
    pub fn check(&mut self, label: impl Into<String>, estimate: f64, se: f64, lo: f64, hi: f64) -> bool {
        let ok = estimate >= lo && estimate <= hi;
        self.labels.push(label.into());
        self.estimates.push(estimate);
        self.se.push(se);
        self.band.push([lo, hi]);
        if !ok {
            self.verdict = self.verdict.combine(Verdict::Fail);
        }
        ok
    }

    pub fn inconclusive(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
        self.verdict = self.verdict.combine(Verdict::Inconclusive);
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.labels
            .iter()
            .zip(self.estimates.iter().zip(&self.band))
            .filter(|(_, (e, b))| !(**e >= b[0] && **e <= b[1]))
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// Attaches a negative control, which must fail; a passing control
    /// invalidates the report.
    pub fn negative_control(&mut self, name: impl Into<String>, control: &TestReport) {
        let outcome = ControlOutcome {
            name: name.into(),
            expected: Verdict::Fail,
            observed: control.verdict,
            failed_checks: control.failed_checks(),
        };
        if outcome.observed != Verdict::Fail {
            self.notes.push(format!("negative control `{}` did not fail", outcome.name));
            self.verdict = self.verdict.combine(Verdict::Fail);
        }
        self.controls.push(outcome);
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable")
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}\n", self.name, self.verdict);
        for i in 0..self.labels.len() {
            let [lo, hi] = self.band[i];
            let ok = self.estimates[i] >= lo && self.estimates[i] <= hi;
            s.push_str(&format!(
                "  [{}] {} = {:.6e} (se {:.2e}) band [{:.4e}, {:.4e}]\n",
                if ok { "ok" } else { "FAIL" },
                self.labels[i],
                self.estimates[i],
                self.se[i],
                lo,
                hi
            ));
        }
        for c in &self.controls {
            s.push_str(&format!(
                "  control {}: expected {}, observed {} ({})\n",
                c.name,
                c.expected,
                c.observed,
                c.failed_checks.join(", ")
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }
}

/// Unit-norm real test function along the first polarisation of `k`,
/// i.e. `sqrt(2) e_1 cos(2 pi k.x)`.
pub fn cosine_mode(n: usize, k: WaveVector) -> crate::Result<SpectralField> {
    let [e1, _] = polarization(k);
    let c = |x: f64| Complex64::new(x, 0.0);
    let f = SpectralField::single_mode(n, k, [c(e1[0]), c(e1[1]), c(e1[2])])?;
    Ok(f.scaled(1.0 / f.norm_h()))
}

/// The two test functions of the martingale suite: a single unit mode and a
/// normalised combination of three modes with mixed phases.
pub fn standard_test_functions(n: usize, cov: &CovarianceSpec) -> crate::Result<Vec<TestFunction>> {
    let single = cosine_mode(n, WaveVector::new(1, 0, 0))?;
    let mut combo = cosine_mode(n, WaveVector::new(0, 1, 1))?;
    combo.axpy(0.5, &cosine_mode(n, WaveVector::new(1, -1, 0))?);
    let [_, e2] = polarization(WaveVector::new(1, 0, 2));
    let s = |x: f64| Complex64::new(0.0, x);
    let sine = SpectralField::single_mode(n, WaveVector::new(1, 0, 2), [s(e2[0]), s(e2[1]), s(e2[2])])?;
    combo.axpy(0.8 / sine.norm_h(), &sine);
    let combo = combo.scaled(1.0 / combo.norm_h());
    Ok(vec![
        TestFunction::new("mode(1,0,0)", single, cov),
        TestFunction::new("combination", combo, cov),
    ])
}

mod band_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(band: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
        let open = |x: f64| x.is_finite().then_some(x);
        band.iter()
            .map(|[lo, hi]| [open(*lo), open(*hi)])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[f64; 2]>, D::Error> {
        let raw = Vec::<[Option<f64>; 2]>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|[lo, hi]| [lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)])
            .collect())
    }
}
