//! Stability diagnostics: the Lipschitz constant of `Phi^pi`, distances between
//! schemes of two almost flows, and `Lambda`-norm bounds.

use std::sync::Arc;

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{Control, Remainder};
use crate::error::{Result, SewingError};
use crate::flow::{check_partition, norm, AlmostFlow};
use crate::partition::{mu, Partition};
use crate::perturb::UniformNoise;
use crate::rng::CounterRng;
use crate::sewing::{perturbed_scheme, phi_terms, run_scheme, SchemePath};
use crate::stats::{linear_fit, two_factor_fit, LinearFit};

/// Second paths for Lipschitz sampling: even indices restart the scheme from a
/// shifted origin, odd indices run a noise-perturbed scheme from the same origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathPairSampler {
    pub count: usize,
    /// largest `|b - a|`
    pub offset: f64,
    /// largest noise level `eta`
    pub noise: f64,
    pub seed: u64,
}

/// Pair `k` depends only on `(seed, k)`, so a larger `count` extends the list.
pub fn sample_pairs(
    flow: &dyn AlmostFlow,
    pi: &Partition,
    a: &Array1<f64>,
    sampler: &PathPairSampler,
    omega: Arc<dyn Control>,
    varpi: Arc<dyn Remainder>,
) -> Result<Vec<(SchemePath, SchemePath)>> {
    let base = run_scheme(flow, pi, a, None)?;
    let root = CounterRng::new(sampler.seed);
    (0..sampler.count)
        .into_par_iter()
        .map(|k| {
            let mut cur = root.substream(k as u64).cursor();
            let other = if k % 2 == 0 {
                let shift = Array1::from(cur.unit(a.len())) * (sampler.offset * cur.uniform());
                run_scheme(flow, pi, &(a + &shift), None)?
            } else {
                let eps = UniformNoise {
                    eta: sampler.noise * cur.uniform(),
                    dim: a.len(),
                    seed: cur.index(usize::MAX) as u64,
                    omega: omega.clone(),
                    varpi: varpi.clone(),
                };
                perturbed_scheme(flow, &eps, pi, a, None)?
            };
            Ok((base.clone(), other))
        })
        .collect()
}

/// Ingredients of the analytic bound on the Lipschitz constant of `Phi^pi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllIngredients {
    pub delta_t: f64,
    /// `||d phi||_{Lip / varpi}`
    pub defect_lip: f64,
    /// `phi_star(K)` from the four-point profile
    pub phi_star_k: f64,
    pub kappa: f64,
    /// `varpi(omega_{0,T})`
    pub varpi_total: f64,
}

/// `delta_T + (||d phi||_{Lip/varpi} + (1 + delta_T)(2 + delta_T) + phi_star(K)) / (1 - kappa) * varpi(omega_{0,T})`
pub fn ell_t_formula(ing: &EllIngredients) -> f64 {
    let d = ing.delta_t;
    d + (ing.defect_lip + (1.0 + d) * (2.0 + d) + ing.phi_star_k) / (1.0 - ing.kappa) * ing.varpi_total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `sup ||Phi^pi(y) - Phi^pi(z)||_inf / ||y - z||_inf` over the sampled pairs
    pub ell_hat: f64,
    pub ell_t_formula: f64,
    pub ingredients: EllIngredients,
    pub contraction: bool,
    /// pairs with `y != z`
    pub pairs: usize,
    pub seed: u64,
}

/// `Phi^pi(y)` is read as the path `j -> Phi^pi_{0,j}(y)`.
pub fn lipschitz_phi_pi(
    flow: &dyn AlmostFlow,
    pairs: &[(SchemePath, SchemePath)],
    ingredients: EllIngredients,
    seed: u64,
) -> Result<StabilityReport> {
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(y, z)| -> Result<Option<f64>> {
            let dist = y.sup_distance(z);
            if dist == 0.0 {
                return Ok(None);
            }
            let ty = phi_terms(flow, &y.partition, &y.values)?;
            let tz = phi_terms(flow, &z.partition, &z.values)?;
            let mut acc = Array1::<f64>::zeros(y.dim());
            let mut worst = 0.0f64;
            for (u, v) in ty.iter().zip(&tz) {
                acc = acc + u - v;
                worst = worst.max(norm(&acc));
            }
            Ok(Some(worst / dist))
        })
        .collect::<Result<_>>()?;
    let valid: Vec<f64> = ratios.into_iter().flatten().collect();
    let ell_hat = valid.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport {
        ell_hat,
        ell_t_formula: ell_t_formula(&ingredients),
        ingredients,
        contraction: !valid.is_empty() && ell_hat < 1.0,
        pairs: valid.len(),
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeDistanceRow {
    /// `max_{i<j} |y_j - phi_{j,i}(y_i) - z_j + psi_{j,i}(z_i)| / varpi(omega_{i,j})`
    pub lhs: f64,
    pub sup_dist: f64,
    pub d_a: f64,
    pub start_gap: f64,
}

/// Schemes of `phi` from `a` and of `psi` from `b` on the same partition.
#[allow(clippy::too_many_arguments)]
pub fn scheme_distance(
    phi: &dyn AlmostFlow,
    psi: &dyn AlmostFlow,
    pi: &Partition,
    a: &Array1<f64>,
    b: &Array1<f64>,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    d_a: f64,
) -> Result<SchemeDistanceRow> {
    check_partition(psi, pi)?;
    let y = run_scheme(phi, pi, a, None)?;
    let z = run_scheme(psi, pi, b, None)?;
    let pts = pi.points();
    let n = pts.len();
    let lhs = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0f64;
            for j in i + 1..n {
                let w = varpi.eval(omega.eval(pts[i], pts[j]));
                if w == 0.0 {
                    continue;
                }
                let gy = &y.values[j] - &phi.apply(pts[i], pts[j], &y.values[i]);
                let gz = &z.values[j] - &psi.apply(pts[i], pts[j], &z.values[i]);
                worst = worst.max(norm(&(gy - gz)) / w);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(SchemeDistanceRow {
        lhs,
        sup_dist: y.sup_distance(&z),
        d_a,
        start_gap: norm(&(a - b)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeDistanceReport {
    pub rows: Vec<SchemeDistanceRow>,
    /// `sup_dist ~ C d_A + C' |a - b|`, least squares through the origin
    pub c: f64,
    pub c_prime: f64,
    /// `sup_dist ~ intercept + slope d_A`, with its `R^2`
    pub linear: Option<LinearFit>,
    /// `max_k lhs_k / (C_lhs d_A,k) - 1` with `C_lhs` fitted the same way on `lhs`
    pub lhs_excess: f64,
}

pub fn fit_scheme_distance(rows: Vec<SchemeDistanceRow>) -> Result<SchemeDistanceReport> {
    let da: Vec<f64> = rows.iter().map(|r| r.d_a).collect();
    let gap: Vec<f64> = rows.iter().map(|r| r.start_gap).collect();
    let sup: Vec<f64> = rows.iter().map(|r| r.sup_dist).collect();
    let lhs: Vec<f64> = rows.iter().map(|r| r.lhs).collect();
    let (c, c_prime) = two_factor_fit(&da, &gap, &sup)
        .ok_or_else(|| SewingError::InvalidParameter("scheme distance batch is degenerate".into()))?;
    let (c_lhs, _) = two_factor_fit(&da, &gap, &lhs).unwrap_or((0.0, 0.0));
    let lhs_excess = rows
        .iter()
        .filter(|r| r.d_a > 0.0 && c_lhs > 0.0)
        .map(|r| r.lhs / (c_lhs * r.d_a) - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SchemeDistanceReport {
        linear: linear_fit(&da, &sup),
        rows,
        c,
        c_prime,
        lhs_excess,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaReport {
    /// `sup_{s<t} |y_t - y_s| / Lambda(omega_{s,t})`
    pub lambda_norm: f64,
    pub sup_norm: f64,
    /// `2|a| + 2 K varpi(omega_{0,T}) + 2 C_Lambda R_0 Lambda(omega_{0,T})`
    pub bound_sup: f64,
    /// `C_Lambda max(||y||_inf, R_0) + K Theta(omega_{0,T})`
    pub bound_lambda: f64,
    pub c_lambda: f64,
    pub r0: f64,
    pub k: f64,
    /// `C_Lambda Lambda(omega_{0,T}) <= 1/2`
    pub certified: bool,
    /// pairs where the path moves but `Lambda(omega) = 0`
    pub flagged: usize,
}

/// `C_Lambda = sup_{R0 <= R <= R_max} Phi(R) / R` with
/// `Phi(R) = sup_{|a| <= R} sup_{s<t} |hat phi_{t,s}(a)| / Lambda(omega_{s,t})`, sampled on
/// spheres of radii between `r0` and `r_max` over node pairs of `pi`.
#[allow(clippy::too_many_arguments)]
pub fn sample_c_lambda(
    flow: &dyn AlmostFlow,
    pi: &Partition,
    gauge: &dyn Remainder,
    omega: &dyn Control,
    r0: f64,
    r_max: f64,
    count: usize,
    seed: u64,
) -> f64 {
    let pts = pi.points();
    let root = CounterRng::new(seed);
    let radii: Vec<f64> = (0..8).map(|k| r0 * (r_max / r0).powf(k as f64 / 7.0)).collect();
    // Phi(R) is a sup over the ball, so a running max over increasing radii
    let per_radius: Vec<f64> = radii
        .par_iter()
        .enumerate()
        .map(|(ri, &r)| {
            let mut cur = root.substream(ri as u64).cursor();
            let mut worst = 0.0f64;
            for _ in 0..count {
                let a = Array1::from(cur.ball(flow.dim(), r));
                let i = cur.index(pts.len() - 1);
                let j = i + 1 + cur.index(pts.len() - 1 - i);
                let g = gauge.eval(omega.eval(pts[i], pts[j]));
                if g > 0.0 {
                    worst = worst.max(norm(&(flow.apply(pts[i], pts[j], &a) - &a)) / g);
                }
            }
            worst
        })
        .collect();
    let mut phi_r = 0.0f64;
    let mut c = 0.0f64;
    for (r, v) in radii.iter().zip(per_radius) {
        phi_r = phi_r.max(v);
        c = c.max(phi_r / r);
    }
    c
}

/// `Lambda`-norm of a path over all node pairs, with both boundedness bounds.
#[allow(clippy::too_many_arguments)]
pub fn lambda_norm(
    y: &SchemePath,
    gauge: &dyn Remainder,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    k: f64,
    c_lambda: f64,
    r0: f64,
) -> LambdaReport {
    let pts = y.partition.points();
    let n = pts.len();
    let rows: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = (0.0f64, 0usize);
            for j in i + 1..n {
                let g = gauge.eval(omega.eval(pts[i], pts[j]));
                let step = norm(&(&y.values[j] - &y.values[i]));
                if g > 0.0 {
                    out.0 = out.0.max(step / g);
                } else if step > 0.0 {
                    out.1 += 1;
                }
            }
            out
        })
        .collect();
    let total = omega.eval(0.0, y.partition.horizon());
    let lam_total = gauge.eval(total);
    let theta = if lam_total > 0.0 { varpi.eval(total) / lam_total } else { 0.0 };
    let sup_norm = y.sup_norm();
    LambdaReport {
        lambda_norm: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        sup_norm,
        bound_sup: 2.0 * norm(&y.origin) + 2.0 * k * varpi.eval(total) + 2.0 * c_lambda * r0 * lam_total,
        bound_lambda: c_lambda * sup_norm.max(r0) + k * theta,
        c_lambda,
        r0,
        k,
        certified: c_lambda * lam_total <= 0.5,
        flagged: rows.iter().map(|r| r.1).sum(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyRow {
    pub mesh: f64,
    /// `max(mu(pi), mu(sigma))` over the whole interval
    pub mu: f64,
    pub distance: f64,
    pub ratio: f64,
}

/// `||y^pi - y^sigma||_inf / max(mu(pi), mu(sigma))` for each `pi` against the finest `sigma`,
/// measured on the nodes of `pi`.
pub fn cauchy_ladder(
    flow: &dyn AlmostFlow,
    levels: &[Partition],
    finest: &Partition,
    a: &Array1<f64>,
    omega: &dyn Control,
    varpi: &dyn Remainder,
) -> Result<Vec<CauchyRow>> {
    let t = finest.horizon();
    let reference = run_scheme(flow, finest, a, None)?;
    let mu_sigma = mu(finest, omega, varpi, 0.0, t);
    levels
        .par_iter()
        .map(|pi| {
            let y = run_scheme(flow, pi, a, None)?;
            let m = mu(pi, omega, varpi, 0.0, t).max(mu_sigma);
            let distance = y.sup_distance(&reference.restrict(pi)?);
            Ok(CauchyRow {
                mesh: pi.mesh(),
                mu: m,
                distance,
                ratio: if m > 0.0 { distance / m } else { 0.0 },
            })
        })
        .collect()
}
