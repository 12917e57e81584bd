//! Controls `omega`, remainders `varpi`, and the global hypotheses tying them together.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SewingError};

/// A super-additive cost on the time simplex, vanishing on the diagonal.
pub trait Control: Send + Sync {
    fn eval(&self, s: f64, t: f64) -> f64;
    fn horizon(&self) -> f64;
    fn name(&self) -> String;

    /// `sup { omega(s, s + h) : 0 <= s <= T - h }`, used to turn time steps into control values.
    /// The default scans 257 evenly spaced starting points.
    fn modulus(&self, h: f64) -> f64 {
        let t = self.horizon();
        if h <= 0.0 {
            return 0.0;
        }
        if h >= t {
            return self.eval(0.0, t);
        }
        (0..=256)
            .map(|k| {
                let s = (t - h) * k as f64 / 256.0;
                self.eval(s, s + h)
            })
            .fold(0.0, f64::max)
    }
}

/// `omega(s, t) = scale * (t - s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearControl {
    pub scale: f64,
    pub horizon: f64,
}

impl LinearControl {
    pub fn new(scale: f64, horizon: f64) -> Self {
        Self { scale, horizon }
    }

    pub fn unit(horizon: f64) -> Self {
        Self::new(1.0, horizon)
    }
}

impl Control for LinearControl {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (self.scale * (t - s)).max(0.0)
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn name(&self) -> String {
        format!("linear:scale={}", self.scale)
    }

    fn modulus(&self, h: f64) -> f64 {
        (self.scale * h.min(self.horizon)).max(0.0)
    }
}

/// Nondecreasing remainder with `varpi(0) = 0` and `varpi(x) / x -> 0`.
pub trait Remainder: Send + Sync {
    fn eval(&self, x: f64) -> f64;
    fn name(&self) -> String;
}

/// `varpi(x) = x^theta`, theta > 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerRemainder {
    pub theta: f64,
}

impl PowerRemainder {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }

    /// The remainder for a Davie expansion of a Lip(gamma) field along a p-rough path.
    pub fn davie(gamma: f64, p: f64) -> Self {
        Self::new((2.0 + gamma) / p)
    }

    /// Exact dyadic contraction `2 varpi(x/2) / varpi(x) = 2^(1 - theta)`.
    pub fn kappa(&self) -> f64 {
        2f64.powf(1.0 - self.theta)
    }
}

impl Remainder for PowerRemainder {
    fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x.powf(self.theta)
        }
    }

    fn name(&self) -> String {
        format!("pow:theta={}", self.theta)
    }
}

/// Sup over the grid of `2 varpi(x/2) / varpi(x)`.
///
/// The caller rejects the remainder when the result is `>= 1`.
pub fn certify_kappa(rem: &dyn Remainder, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(SewingError::InvalidGrid("empty kappa grid".into()));
    }
    let mut kappa = 0.0f64;
    for &x in grid {
        if !(x > 0.0) || !x.is_finite() {
            return Err(SewingError::InvalidGrid(format!("non-positive grid value {x}")));
        }
        let full = rem.eval(x);
        if full == 0.0 {
            return Err(SewingError::DegenerateRemainder { x });
        }
        kappa = kappa.max(2.0 * rem.eval(x / 2.0) / full);
    }
    Ok(kappa)
}

/// `n` log-spaced points spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || n < 2 {
        return Err(SewingError::InvalidGrid(format!(
            "log grid needs 0 < lo <= hi and n >= 2 (lo={lo}, hi={hi}, n={n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Minimum grid density used when certifying kappa at the scales a run visits.
pub const MIN_KAPPA_GRID: usize = 64;

/// The time-horizon hypothesis `kappa + 2 delta(T) < 1`.
pub fn time_horizon_ok(kappa: f64, delta: &DeltaFunction, horizon: f64) -> bool {
    kappa + 2.0 * delta.eval(horizon) < 1.0
}

/// Nondecreasing `delta` with `delta(0) = 0`.
#[derive(Clone)]
pub struct DeltaFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl DeltaFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new("0", |_| 0.0)
    }

    pub fn constant_for_positive(c: f64) -> Self {
        Self::new(format!("{c}*1[h>0]"), move |h| if h > 0.0 { c } else { 0.0 })
    }

    /// `sum_i c_i h^(e_i)`.
    pub fn power_sum(terms: Vec<(f64, f64)>) -> Self {
        let label = terms
            .iter()
            .map(|(c, e)| format!("{c:.4e}*h^{e:.4}"))
            .collect::<Vec<_>>()
            .join(" + ");
        Self::new(label, move |h| {
            if h <= 0.0 {
                0.0
            } else {
                terms.iter().map(|(c, e)| c * h.powf(*e)).sum()
            }
        })
    }

    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            (self.f)(h)
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let inner = self.clone();
        Self::new(format!("({})*{factor}", self.label), move |h| {
            factor * inner.eval(h)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for DeltaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeltaFunction({})", self.label)
    }
}

/// Sampled check of super-additivity over every triple of `times`; returns the worst violation.
pub fn superadditivity_defect(omega: &dyn Control, times: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &r) in times.iter().enumerate() {
        for (j, &s) in times.iter().enumerate().skip(i) {
            let rs = omega.eval(r, s);
            for &t in &times[j..] {
                let rt = omega.eval(r, t);
                let excess = rs + omega.eval(s, t) - rt - 1e-12 * (1.0 + rt);
                worst = worst.max(excess);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_of_power_law_is_exact() {
        let grid = log_grid(1e-6, 4.0, 64).unwrap();
        let k = certify_kappa(&PowerRemainder::new(1.2), &grid).unwrap();
        assert!((k - 2f64.powf(-0.2)).abs() < 1e-12);
        assert!((k - 0.870_550_563_296_124).abs() < 1e-12);
    }

    #[test]
    fn linear_remainder_is_rejected_by_caller() {
        let grid = log_grid(1e-3, 1.0, 64).unwrap();
        let k = certify_kappa(&PowerRemainder::new(1.0), &grid).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
        assert!(k >= 1.0);
    }

    #[test]
    fn davie_remainder_kappa() {
        let rem = PowerRemainder::davie(0.5, 2.1);
        let closed = 2f64.powf(1.0 - 2.5 / 2.1);
        let grid = log_grid(1e-5, 1.0, 128).unwrap();
        let sampled = certify_kappa(&rem, &grid).unwrap();
        assert!((sampled - closed).abs() < 1e-12);
        assert!((closed - 0.876_316_427_736_433_7).abs() < 1e-12);
    }

    #[test]
    fn degenerate_remainder_detected() {
        struct Flat;
        impl Remainder for Flat {
            fn eval(&self, x: f64) -> f64 {
                if x < 0.5 {
                    0.0
                } else {
                    x * x
                }
            }
            fn name(&self) -> String {
                "flat".into()
            }
        }
        assert_eq!(
            certify_kappa(&Flat, &[1.0, 0.25]),
            Err(SewingError::DegenerateRemainder { x: 0.25 })
        );
        assert!(certify_kappa(&Flat, &[]).is_err());
        assert!(certify_kappa(&Flat, &[-1.0]).is_err());
    }

    #[test]
    fn horizon_hypothesis() {
        assert!(time_horizon_ok(0.5, &DeltaFunction::constant_for_positive(0.1), 1.0));
        assert!(!time_horizon_ok(0.9, &DeltaFunction::constant_for_positive(0.1), 1.0));
        assert!(time_horizon_ok(0.8706, &DeltaFunction::constant_for_positive(0.05), 1.0));
    }

    #[test]
    fn remainder_is_superlinear_at_zero() {
        let rem = PowerRemainder::new(1.2);
        let ratios: Vec<f64> = (0..40).map(|k| {
            let x = 2f64.powi(-k);
            rem.eval(x) / x
        }).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
        assert!(*ratios.last().unwrap() < 1e-2);
        assert_eq!(rem.eval(0.0), 0.0);
    }

    #[test]
    fn linear_control_is_superadditive() {
        let omega = LinearControl::new(2.0, 1.0);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        assert!(superadditivity_defect(&omega, &times) <= 0.0);
        assert_eq!(omega.eval(0.3, 0.3), 0.0);
    }

    #[test]
    fn delta_function_basics() {
        let d = DeltaFunction::power_sum(vec![(2.0, 0.5), (1.0, 1.0)]);
        assert_eq!(d.eval(0.0), 0.0);
        assert!((d.eval(0.25) - 1.25).abs() < 1e-15);
        assert!((d.scaled(2.0).eval(0.25) - 2.5).abs() < 1e-15);
    }
}
