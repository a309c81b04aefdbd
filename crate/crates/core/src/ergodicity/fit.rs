use serde::Serialize;

use crate::error::{Error, Result};

/// Weighted least-squares fit of `ln m(t) = intercept - rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLinearFit {
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Indices `[lo, hi)` of the points used.
    pub window: (usize, usize),
}

/// The fit window: `t >= burn_in` and `mean > 10 se`, cut at the first
/// point that fails the signal test.
pub fn fit_window(times: &[f64], mean: &[f64], se: &[f64], burn_in: f64) -> Result<(usize, usize)> {
    let lo = times.iter().position(|&t| t >= burn_in).unwrap_or(times.len());
    let mut hi = lo;
    while hi < times.len() && mean[hi] > 0.0 && mean[hi] > 10.0 * se[hi] && mean[hi].is_finite() {
        hi += 1;
    }
    if hi - lo < 2 {
        return Err(Error::InsufficientDecay(format!(
            "{} usable points after burn-in {burn_in}; need 2 with mean > 10 se",
            hi - lo
        )));
    }
    Ok((lo, hi))
}

/// Fits on the given window with delta-method weights `(mean / se)^2`
/// (the inverse variance of `ln mean`); uniform weights when any `se` is 0.
pub fn fit_log_linear(times: &[f64], mean: &[f64], se: &[f64], window: (usize, usize)) -> Result<LogLinearFit> {
    let (lo, hi) = window;
    let uniform = se[lo..hi].iter().any(|&s| s <= 0.0);
    let pts: Vec<(f64, f64, f64)> = (lo..hi)
        .map(|i| {
            let w = if uniform { 1.0 } else { (mean[i] / se[i]).powi(2) };
            (times[i], mean[i].ln(), w)
        })
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::InsufficientDecay("non-positive mean inside the fit window".into()));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let tb = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let yb = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let stt: f64 = pts.iter().map(|p| p.2 * (p.0 - tb).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| p.2 * (p.0 - tb) * (p.1 - yb)).sum();
    if stt <= 0.0 {
        return Err(Error::InsufficientDecay("fit window has a single time".into()));
    }
    let slope = sty / stt;
    let intercept = yb - slope * tb;
    let ss_tot: f64 = pts.iter().map(|p| p.2 * (p.1 - yb).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LogLinearFit { rate: -slope, intercept, r2, window })
}

/// Per-time mean and standard error over replicas (rows).
pub fn mean_and_se(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; m];
    let mut se = vec![0.0; m];
    if n == 0 {
        return (mean, se);
    }
    for j in 0..m {
        let mu = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = if n > 1 { rows.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        mean[j] = mu;
        se[j] = (var / n as f64).sqrt();
    }
    (mean, se)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic level-0.01 critical value of [`ks_statistic`].
pub fn ks_critical_01(n: usize, m: usize) -> f64 {
    1.627_6 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
