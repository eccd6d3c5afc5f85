use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), (sample_var(xs) / xs.len() as f64).sqrt())
}

/// Pearson correlation; zero when either sample is constant.
pub fn corr(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (a, b) = (x - mx, y - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Two-sided `level` band for `s^2 / sigma^2` with `m` Gaussian samples:
/// `chi2_{(1-level)/2}(m-1)/(m-1)` to `chi2_{(1+level)/2}(m-1)/(m-1)`.
pub fn chi_square_band(m: usize, level: f64) -> (f64, f64) {
    let dof = (m - 1) as f64;
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    let tail = (1.0 - level) / 2.0;
    (quantile(&chi, tail) / dof, quantile(&chi, 1.0 - tail) / dof)
}

/// statrs' bracketing inverse is only good to ~1e-5; polish with Newton.
fn quantile(chi: &ChiSquared, p: f64) -> f64 {
    let mut x = chi.inverse_cdf(p);
    for _ in 0..4 {
        let d = chi.pdf(x);
        if d <= 0.0 {
            break;
        }
        x -= (chi.cdf(x) - p) / d;
    }
    x
}
