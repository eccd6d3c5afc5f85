use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TestReport;
use crate::error::Result;
use crate::nonlinearity::{bnorm_negative_of, ratio_sweep, PseudoSpectral, SweepCell, SweepRow};
use crate::spectral::{random_divfree_field, sobolev_inner, sobolev_norm, Profile, SpectralField};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// `(alpha, eps)`; `eps` is required at `alpha = 1/2`.
    pub alphas: Vec<(f64, Option<f64>)>,
    pub resolutions: Vec<usize>,
    pub seeds: Range<u64>,
    pub profile: Profile,
    /// Admissible relative spread of the per-cell maxima across resolutions.
    pub tolerance: f64,
    /// Exponent of the negative-norm check (`None` skips it).
    pub gamma: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            alphas: vec![(0.3, None), (0.5, Some(0.01)), (0.75, None), (1.0, None)],
            resolutions: vec![8, 16, 32],
            seeds: 0..100,
            profile: Profile::power_law(1.0, 6.0),
            tolerance: 0.1,
            gamma: Some(1.75),
        }
    }
}

/// Bilinear-estimate sweep: per-row ratios, per-cell maxima, and the verdict
/// "bounded" when, for every `alpha`, the largest and smallest cell maxima
/// across resolutions differ by at most `tolerance` (relative to the smallest).
pub fn inequality_sweep(spec: &SweepSpec) -> Result<(Vec<SweepRow>, Vec<SweepCell>, TestReport)> {
    let mut report = TestReport::new("bilinear sweep");
    report
        .param("resolutions", &spec.resolutions)
        .param("seeds", [spec.seeds.start, spec.seeds.end])
        .param("tolerance", spec.tolerance);
    if spec.alphas.is_empty() || spec.resolutions.is_empty() || spec.seeds.is_empty() {
        return Ok((Vec::new(), Vec::new(), report));
    }
    let (rows, cells) = ratio_sweep(&spec.alphas, &spec.resolutions, spec.seeds.clone(), &spec.profile)?;
    for &(alpha, eps) in &spec.alphas {
        let maxima: Vec<f64> = cells
            .iter()
            .filter(|c| c.alpha == alpha && c.eps == eps)
            .map(|c| c.max)
            .collect();
        let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let label = match eps {
            Some(e) => format!("spread(alpha={alpha},eps={e})"),
            None => format!("spread(alpha={alpha})"),
        };
        report.check(label, (hi - lo) / lo, 0.0, 0.0, spec.tolerance);
    }
    if let Some(gamma) = spec.gamma {
        let mut per_n = Vec::new();
        for &n in &spec.resolutions {
            let mut ps = PseudoSpectral::new(n, 1.5)?;
            let worst = spec
                .seeds
                .clone()
                .map(|s| {
                    let u = random_divfree_field(n, &spec.profile, 2 * s);
                    bnorm_negative_of(&ps.b_uu(&u), &u, gamma)
                })
                .fold(0.0, f64::max);
            per_n.push((n, worst));
        }
        report.param("gamma", gamma).param("bnorm_negative_max", &per_n);
    }
    Ok((rows, cells, report))
}

/// Fitted constants of
/// `<A^m v, B(v+z, v+z)> <= |A^((m+1)/2) v|^2 / 2 + C (1 + |v|_V + |A^(m/2) z|)^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointFit {
    pub m: u32,
    pub n: usize,
    pub c: f64,
    pub p: f64,
    pub safety: f64,
    pub fit_samples: usize,
    pub verify_samples: usize,
    /// Fresh samples violating the fitted bound.
    pub violations: usize,
    /// Largest `(lhs - dissipation) / (C base^p)` on the fresh samples.
    pub worst_utilisation: f64,
}

struct EndpointSample {
    excess: f64,
    base: f64,
}

fn endpoint_sample(ps: &mut PseudoSpectral, n: usize, m: u32, amp: f64, seed: u64) -> EndpointSample {
    let mf = m as f64;
    let v = random_divfree_field(n, &Profile::power_law(amp, 3.0), 2 * seed);
    let z = random_divfree_field(n, &Profile::power_law(amp, 3.5), 2 * seed + 1);
    let w: SpectralField = &v + &z;
    let b = ps.b_uu(&w);
    // <A^m v, b> = <A^(m/2) v, A^(m/2) b>
    let lhs = sobolev_inner(&v, &b, mf / 2.0);
    let dissipation = 0.5 * sobolev_norm(&v, (mf + 1.0) / 2.0).powi(2);
    EndpointSample {
        excess: lhs - dissipation,
        base: 1.0 + sobolev_norm(&v, 0.5) + sobolev_norm(&z, mf / 2.0),
    }
}

fn amplitude(i: u64) -> f64 {
    // ten log-spaced levels in [0.1, 100]
    10f64.powf(-1.0 + 3.0 * (i % 10) as f64 / 9.0)
}

/// Fits `(C, p)` on `samples` random `(v, z)` pairs at resolution `n`
/// (amplitudes cycling over ten log-spaced levels), inflates `C` by `safety`,
/// and re-checks the bound on as many pairs drawn from fresh seeds.
///
/// `p` minimises the bound at the median base over a grid in `[1, 8]`.
pub fn endpoint_inequality(n: usize, m: u32, samples: u64, safety: f64) -> Result<EndpointFit> {
    let mut ps = PseudoSpectral::new(n, 1.5)?;
    let fit: Vec<EndpointSample> = (0..samples)
        .map(|i| endpoint_sample(&mut ps, n, m, amplitude(i), i))
        .collect();
    let mut bases: Vec<f64> = fit.iter().map(|s| s.base).collect();
    bases.sort_by(f64::total_cmp);
    let median = bases[bases.len() / 2];
    let c_of = |p: f64| {
        fit.iter()
            .map(|s| s.excess.max(0.0) / s.base.powf(p))
            .fold(0.0, f64::max)
    };
    let (p, c) = (4..=32)
        .map(|i| i as f64 * 0.25)
        .map(|p| (p, c_of(p)))
        .min_by(|a, b| (a.1 * median.powf(a.0)).total_cmp(&(b.1 * median.powf(b.0))))
        .expect("non-empty grid");
    let c = c * safety;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let s = endpoint_sample(&mut ps, n, m, amplitude(i), 1_000_000 + i);
        let bound = c * s.base.powf(p);
        if s.excess > bound {
            violations += 1;
        }
        if bound > 0.0 {
            worst = worst.max(s.excess / bound);
        }
    }
    Ok(EndpointFit {
        m,
        n,
        c,
        p,
        safety,
        fit_samples: samples as usize,
        verify_samples: samples as usize,
        violations,
        worst_utilisation: worst,
    })
}
