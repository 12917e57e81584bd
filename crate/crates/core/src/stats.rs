//! Least-squares fits and order statistics used by the experiment reports.

use serde::Serialize;

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        n,
    })
}

/// Slope of `log(err)` against `log(mesh)`. Non-positive entries are rejected.
pub fn log_log_fit(mesh: &[f64], err: &[f64]) -> Option<LinearFit> {
    if mesh.iter().chain(err).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = mesh.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Least squares through the origin on two regressors: `y ~ c1 * x1 + c2 * x2`.
/// Falls back to a single regressor when the second column is identically zero.
pub fn two_factor_fit(x1: &[f64], x2: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let s11: f64 = x1.iter().map(|v| v * v).sum();
    let s22: f64 = x2.iter().map(|v| v * v).sum();
    let s12: f64 = x1.iter().zip(x2).map(|(a, b)| a * b).sum();
    let s1y: f64 = x1.iter().zip(y).map(|(a, b)| a * b).sum();
    let s2y: f64 = x2.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = s11 * s22 - s12 * s12;
    if det.abs() > 1e-14 * (s11 * s22).max(1e-300) {
        Some(((s1y * s22 - s2y * s12) / det, (s2y * s11 - s1y * s12) / det))
    } else if s11 > 0.0 {
        Some((s1y / s11, 0.0))
    } else if s22 > 0.0 {
        Some((0.0, s2y / s22))
    } else {
        None
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
