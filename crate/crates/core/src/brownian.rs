//! Milstein scheme over enhanced Ito Brownian motion: reference solvers,
//! remainder moments and pathwise rate regressions.

use std::sync::Arc;

use ndarray::{array, Array1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SewingError};
use crate::field::SharedField;
use crate::flow::{norm, AlmostFlow, DavieFlow};
use crate::partition::Partition;
use crate::rng::CounterRng;
use crate::rough_path::{sample_ito_ebm, GridRoughPath};
use crate::sewing::{run_scheme, SchemePath};
use crate::stats::{log_log_fit, mean_and_stderr, median, quantile};

/// Errors at or below this level make a rate regression meaningless.
pub const DEGENERATE_ERROR: f64 = 1e-13;

fn davie(sigma: &SharedField, ebm: &Arc<GridRoughPath>, a: &Array1<f64>) -> Result<DavieFlow> {
    let omega = Arc::new(ebm.pvar_control());
    DavieFlow::new(sigma.clone(), ebm.clone(), omega, 4.0 * (1.0 + norm(a)))
}

/// The Davie scheme of `sigma` along `ebm` on `pi`.
pub fn milstein_run(sigma: &SharedField, ebm: &Arc<GridRoughPath>, pi: &Partition, a: &Array1<f64>) -> Result<SchemePath> {
    run_scheme(&davie(sigma, ebm, a)?, pi, a, None)
}

/// Reference solution on the nodes of the driver's own grid.
pub trait ReferenceSolver: Send + Sync {
    fn name(&self) -> String;
    /// How many dyadic levels the driver must be finer than the finest measured mesh.
    fn extra_levels(&self) -> u32;
    fn solve(&self, sigma: &SharedField, ebm: &Arc<GridRoughPath>, a: &Array1<f64>) -> Result<Vec<Array1<f64>>>;
}

/// `X_t = a exp(c B_t - c^2 q_t / 2)` for `sigma(a) = c a`, with `q` the quadratic
/// variation of the sampled sub-grid (`q_t = t` in the continuum).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedFormLinear {
    pub c: f64,
}

impl ReferenceSolver for ClosedFormLinear {
    fn name(&self) -> String {
        format!("closed-form-linear:c={}", self.c)
    }
    fn extra_levels(&self) -> u32 {
        0
    }
    fn solve(&self, sigma: &SharedField, ebm: &Arc<GridRoughPath>, a: &Array1<f64>) -> Result<Vec<Array1<f64>>> {
        if sigma.state_dim() != 1 || sigma.noise_dim() != 1 || ebm.dim() != 1 {
            return Err(SewingError::InvalidParameter("the closed form is scalar".into()));
        }
        let probe = sigma.eval(&array![1.0])[[0, 0]] - sigma.eval(&array![0.0])[[0, 0]];
        if (probe - self.c).abs() > 1e-12 * (1.0 + self.c.abs()) || sigma.eval(&array![0.0])[[0, 0]] != 0.0 {
            return Err(SewingError::InvalidParameter(format!(
                "field {} is not a -> {} a",
                sigma.name(),
                self.c
            )));
        }
        let c = self.c;
        let mut b = 0.0;
        let mut q = 0.0;
        let mut out = Vec::with_capacity(ebm.increments().len() + 1);
        out.push(a.clone());
        for inc in ebm.increments() {
            b += inc.x1[0];
            q += inc.bracket()[[0, 0]];
            out.push(a * (c * b - 0.5 * c * c * q).exp());
        }
        Ok(out)
    }
}

/// The same scheme on the driver's own (finer) grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FineScheme {
    pub extra_levels: u32,
}

impl ReferenceSolver for FineScheme {
    fn name(&self) -> String {
        format!("fine-scheme:+{}", self.extra_levels)
    }
    fn extra_levels(&self) -> u32 {
        self.extra_levels
    }
    fn solve(&self, sigma: &SharedField, ebm: &Arc<GridRoughPath>, a: &Array1<f64>) -> Result<Vec<Array1<f64>>> {
        Ok(milstein_run(sigma, ebm, ebm.grid(), a)?.values)
    }
}

/// Per-path driver seed, shared by every mesh level of that path.
pub fn path_seed(seed: u64, path: usize) -> u64 {
    CounterRng::new(seed).substream(path as u64).bits(0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EbmSpec {
    pub horizon: f64,
    /// Ito sub-steps per interval of the finest grid
    pub sub: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiRow {
    pub s: f64,
    pub t: f64,
    /// `(E |Psi_{s,t}|^k)^{1/k}`
    pub moment: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiReport {
    pub k: u32,
    pub rows: Vec<PsiRow>,
    pub fitted_exponent: Option<f64>,
    /// `(2 + gamma) / 2`
    pub target: f64,
    /// some relative standard error above 5%
    pub widened: bool,
    pub n_mc: usize,
    pub fine_level: u32,
    pub reference: String,
    pub seed: u64,
}

/// `Psi_{s,t}(a) = X_t - X_s - sigma(X_s) B_{s,t} - D sigma sigma(X_s) B^(2)_{s,t}` against a
/// reference solution on the dyadic grid of level `fine_level` over `[0, max t]`.
#[allow(clippy::too_many_arguments)]
pub fn psi_moment_check(
    sigma: &SharedField,
    reference: &dyn ReferenceSolver,
    a: &Array1<f64>,
    k: u32,
    pairs: &[(f64, f64)],
    n_mc: usize,
    fine_level: u32,
    ebm: &EbmSpec,
    seed: u64,
) -> Result<PsiReport> {
    if pairs.is_empty() || n_mc < 2 || k == 0 {
        return Err(SewingError::InvalidParameter("need pairs, n_mc >= 2 and k >= 1".into()));
    }
    let horizon = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let grid = Partition::dyadic(fine_level, horizon)?;
    for &(s, t) in pairs {
        if !(s < t) || grid.index_of(s).is_none() || grid.index_of(t).is_none() {
            return Err(SewingError::OffGrid(if grid.index_of(s).is_none() { s } else { t }));
        }
    }
    let samples: Vec<Vec<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|n| -> Result<Vec<f64>> {
            let x = Arc::new(sample_ito_ebm(sigma.noise_dim(), &grid, ebm.sub, path_seed(seed, n), ebm.p)?);
            let sol = reference.solve(sigma, &x, a)?;
            let flow = davie(sigma, &x, a)?;
            Ok(pairs
                .iter()
                .map(|&(s, t)| {
                    let (i, j) = (grid.index_of(s).unwrap(), grid.index_of(t).unwrap());
                    norm(&(&sol[j] - &flow.apply(s, t, &sol[i]))).powi(k as i32)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut widened = false;
    let rows: Vec<PsiRow> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(s, t))| {
            let col: Vec<f64> = samples.iter().map(|r| r[p]).collect();
            let (m, se) = mean_and_stderr(&col);
            let moment = m.powf(1.0 / k as f64);
            // delta method for m^{1/k}
            let stderr = if m > 0.0 { moment / (k as f64 * m) * se } else { 0.0 };
            widened |= moment > 0.0 && stderr > 0.05 * moment;
            PsiRow { s, t, moment, stderr }
        })
        .collect();
    let h: Vec<f64> = rows.iter().map(|r| r.t - r.s).collect();
    let m: Vec<f64> = rows.iter().map(|r| r.moment).collect();
    Ok(PsiReport {
        k,
        fitted_exponent: log_log_fit(&h, &m).map(|f| f.slope),
        target: (2.0 + sigma.gamma()) / 2.0,
        widened,
        rows,
        n_mc,
        fine_level,
        reference: reference.name(),
        seed,
    })
}

/// Rate targets quoted against measured slopes.
pub fn milstein_target(gamma: f64, eps: f64) -> f64 {
    gamma / 2.0 - eps
}

pub fn stable_target(gamma: f64, p: f64) -> f64 {
    (2.0 + gamma) / p - 1.0
}

pub fn young_target(p: f64) -> f64 {
    2.0 / p - 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathFlag {
    Ok,
    /// errors at machine precision, no slope
    Degenerate,
    /// some refinement more than doubled the error
    NonMonotone,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathErrors {
    pub path: usize,
    pub seed: u64,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub flag: PathFlag,
    /// `max |y - X|` escaped to non-finite values
    pub finite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub levels: Vec<u32>,
    pub meshes: Vec<f64>,
    pub paths: Vec<PathErrors>,
    pub median_slope: Option<f64>,
    /// interquartile range of the accepted slopes
    pub dispersion: Option<f64>,
    pub theta_target: f64,
    pub degenerate: usize,
    pub non_monotone: usize,
    pub reference: String,
    pub seed: u64,
    pub ebm: EbmSpec,
}

pub fn classify(errors: &[f64]) -> PathFlag {
    if errors.iter().all(|e| *e <= DEGENERATE_ERROR) {
        PathFlag::Degenerate
    } else if errors.windows(2).any(|w| w[1] > 2.0 * w[0]) {
        PathFlag::NonMonotone
    } else {
        PathFlag::Ok
    }
}

/// Per-path sup errors of the scheme at each dyadic level against the reference,
/// with one driver sample per path on the finest grid coarsened to every level.
#[allow(clippy::too_many_arguments)]
pub fn rate_regression(
    sigma: &SharedField,
    reference: &dyn ReferenceSolver,
    a: &Array1<f64>,
    levels: &[u32],
    n_paths: usize,
    ebm: &EbmSpec,
    theta_target: f64,
    seed: u64,
) -> Result<RateReport> {
    if levels.len() < 2 || n_paths == 0 {
        return Err(SewingError::InvalidParameter("need >= 2 levels and >= 1 path".into()));
    }
    let top = levels.iter().copied().max().unwrap() + reference.extra_levels();
    let fine = Partition::dyadic(top, ebm.horizon)?;
    let parts: Vec<Partition> = levels
        .iter()
        .map(|&l| Partition::dyadic(l, ebm.horizon))
        .collect::<Result<_>>()?;
    let paths: Vec<PathErrors> = (0..n_paths)
        .into_par_iter()
        .map(|path| -> Result<PathErrors> {
            let seed = path_seed(seed, path);
            let x = Arc::new(sample_ito_ebm(sigma.noise_dim(), &fine, ebm.sub, seed, ebm.p)?);
            let sol = reference.solve(sigma, &x, a)?;
            let reference_path = SchemePath {
                partition: fine.clone(),
                values: sol,
                origin: a.clone(),
                flow_tag: reference.name(),
                escapes: 0,
            };
            let mut errors = Vec::with_capacity(parts.len());
            for pi in &parts {
                let coarse = Arc::new(x.coarsen(pi)?);
                let y = milstein_run(sigma, &coarse, pi, a)?;
                errors.push(y.sup_distance(&reference_path.restrict(pi)?));
            }
            let finite = errors.iter().all(|e| e.is_finite());
            let flag = if finite { classify(&errors) } else { PathFlag::NonMonotone };
            let meshes: Vec<f64> = parts.iter().map(|p| p.mesh()).collect();
            let slope = match flag {
                PathFlag::Degenerate => None,
                _ => log_log_fit(&meshes, &errors).map(|f| f.slope),
            };
            Ok(PathErrors { path, seed, errors, slope, flag, finite })
        })
        .collect::<Result<_>>()?;
    let accepted: Vec<f64> = paths
        .iter()
        .filter(|p| p.flag == PathFlag::Ok)
        .filter_map(|p| p.slope)
        .collect();
    let dispersion = quantile(&accepted, 0.75).zip(quantile(&accepted, 0.25)).map(|(hi, lo)| hi - lo);
    Ok(RateReport {
        levels: levels.to_vec(),
        meshes: parts.iter().map(|p| p.mesh()).collect(),
        median_slope: median(&accepted),
        dispersion,
        theta_target,
        degenerate: paths.iter().filter(|p| p.flag == PathFlag::Degenerate).count(),
        non_monotone: paths.iter().filter(|p| p.flag == PathFlag::NonMonotone).count(),
        paths,
        reference: reference.name(),
        seed,
        ebm: ebm.clone(),
    })
}
