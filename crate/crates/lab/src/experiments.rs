//! The experiment registry. Each experiment fills in its own defaults and turns a plan into an outcome.

use std::sync::Arc;

use ndarray::Array1;
use serde_json::{json, Value};
use sewing_core::brownian::{
    milstein_target, psi_moment_check, rate_regression, ClosedFormLinear, EbmSpec, FineScheme, PathFlag, ReferenceSolver,
};
use sewing_core::control::PowerRemainder;
use sewing_core::convergence::{converge, Reference};
use sewing_core::diagnostics::{d_a, defect, four_point, perturbation_norm, QuadSampler, TripleSampler};
use sewing_core::field::{Mollified, SharedField};
use sewing_core::registry::Spec;
use sewing_core::sewing::{certify_d_solution, consistency_gap, fixed_point_defect, perturbed_scheme, run_scheme, SchemePath};
use sewing_core::stability::{
    cauchy_ladder, fit_scheme_distance, lambda_norm, lipschitz_phi_pi, sample_c_lambda, sample_pairs, scheme_distance,
    EllIngredients, PathPairSampler,
};

use crate::config::ExperimentConfig;
use crate::plan::{Model, Plan};
use crate::report::{cell, Check, Outcome, Status, Table};

/// Exactness tolerance for identities that hold by construction.
pub const EXACT_TOL: f64 = 1e-12;

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    /// Values used for every key the user leaves out.
    fn defaults(&self) -> ExperimentConfig;
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome>;
}

pub fn registry() -> Vec<Box<dyn Experiment>> {
    vec![
        Box::new(Converge),
        Box::new(Certify),
        Box::new(Stability),
        Box::new(Perturb),
        Box::new(Brownian),
        Box::new(Generic),
    ]
}

pub fn find(name: &str) -> Option<Box<dyn Experiment>> {
    registry().into_iter().find(|e| e.name() == name)
}

fn defaults(experiment: &str, driver: &str, field: &str, flow: &str, levels: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment);
    cfg.driver.spec = Some(driver.into());
    cfg.driver.seed = Some(0);
    cfg.driver.horizon = Some(1.0);
    cfg.model.field = Some(field.into());
    cfg.model.flow = Some(flow.into());
    cfg.model.omega = Some("pvar".into());
    cfg.model.start = Some(vec![1.0]);
    cfg.model.region = Some(4.0);
    cfg.grid.levels = Some(levels.into());
    cfg.sampling.seed = Some(0);
    cfg.sampling.samples = Some(2000);
    cfg
}

fn provenance(plan: &Plan, model: &Model) -> Value {
    json!({
        "driver": plan.driver,
        "driver_seed": plan.driver_seed,
        "driver_intervals": model.driver.grid().intervals(),
        "horizon": plan.horizon,
        "levels": plan.levels,
        "field": model.field.name(),
        "flow": model.flow.tag(),
        "omega": plan.omega,
        "varpi_theta": model.theta,
        "start": model.start.to_vec(),
        "region": plan.region,
        "sampling_seed": plan.seed,
    })
}

/// Chen defect of the driver and the fixed-point identity of one scheme.
fn exact_checks(model: &Model, y: &SchemePath) -> anyhow::Result<Vec<Check>> {
    let chen = model.driver.chen_defect();
    let fixed = fixed_point_defect(model.flow.as_ref(), y)?;
    Ok(vec![
        Check::invariant("chen", chen <= EXACT_TOL, format!("driver Chen defect {chen:.3e}")),
        Check::invariant(
            "fixed-point",
            fixed <= EXACT_TOL,
            format!("max |y_j - a - Phi_0j(y)| = {fixed:.3e} on {} intervals", y.partition.intervals()),
        ),
    ])
}

fn escape_check(y: &SchemePath, region: f64) -> Check {
    Check::expect(
        "stays-in-region",
        y.escapes == 0,
        format!("{} scheme values left the ball of radius {region}", y.escapes),
    )
}

fn scheme_table(name: &str, y: &SchemePath) -> Table {
    let header: Vec<String> = std::iter::once("t".to_string()).chain((0..y.origin.len()).map(|i| format!("y{i}"))).collect();
    let mut table = Table {
        name: name.to_string(),
        header,
        rows: Vec::new(),
    };
    for (t, v) in y.partition.points().iter().zip(&y.values) {
        table.push(std::iter::once(cell(t)).chain(v.iter().map(cell)).collect());
    }
    table
}

/// `c` when the field spec is the scalar `linear:c=...` (mollified or not).
fn scalar_linear(field: &str) -> Option<f64> {
    let spec: Spec = field.parse().ok()?;
    if spec.name != "linear" || spec.raw("matrix").is_some() {
        return None;
    }
    spec.f64_or("c", 1.0).ok()
}

fn ratio_spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(0.0, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

pub struct Converge;

impl Experiment for Converge {
    fn name(&self) -> &'static str {
        "converge"
    }
    fn about(&self) -> &'static str {
        "sup error of the scheme across dyadic levels, with a log-log slope"
    }
    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = defaults("converge", "line", "linear", "davie", "4..10");
        cfg.grid.reference = Some("auto".into());
        cfg
    }
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome> {
        let top = plan.max_level();
        let driver_name = plan.driver_spec().name;
        let geometric = ["line", "smooth", "weierstrass"].contains(&driver_name.as_str());
        let closed_form = scalar_linear(&plan.field).filter(|_| geometric);
        let exact = match plan.reference.as_str() {
            "exact" => Some(closed_form.ok_or_else(|| {
                anyhow::anyhow!("an exact reference needs field linear:c=... on a line, smooth or weierstrass driver")
            })?),
            "finer" => None,
            _ => closed_form,
        };
        let fine_level = if exact.is_some() { top } else { plan.reference_level.unwrap_or(top + 2) };
        let model = Model::build(plan, fine_level)?;
        let levels = plan.partitions()?;
        let x = model.driver.clone();
        let a = model.start.clone();
        let c = exact.unwrap_or(0.0);
        // dy = c y dx along a geometric scalar driver: y_t = a exp(c (x_t - x_0))
        let solution = move |t: f64| -> Array1<f64> {
            let x1 = if t <= 0.0 { 0.0 } else { x.increment(0.0, t).map_or(f64::NAN, |i| i.x1[0]) };
            &a * (c * x1).exp()
        };
        let reference = match exact {
            Some(_) => Reference::Exact(&solution),
            None => Reference::Finer(model.driver.grid().clone()),
        };
        let rep = converge(model.flow.as_ref(), &levels, &model.start, &reference, Some(plan.region))?;
        let y = run_scheme(model.flow.as_ref(), levels.last().unwrap(), &model.start, Some(plan.region))?;

        let mut table = Table::new("convergence", &["level", "intervals", "mesh", "error"]);
        for ((level, pi), err) in plan.levels.iter().zip(&levels).zip(&rep.errors) {
            table.push(vec![cell(level), cell(pi.intervals()), cell(pi.mesh()), cell(err)]);
        }
        let mut checks = exact_checks(&model, &y)?;
        checks.push(Check::expect(
            "certified-levels",
            rep.uncertified_levels == 0,
            format!("{} levels left the working region", rep.uncertified_levels),
        ));
        checks.push(Check::expect(
            "slope",
            rep.fit.is_some_and(|f| f.slope > 0.0),
            format!("log-log slope {:?}", rep.fit.map(|f| f.slope)),
        ));
        Ok(Outcome {
            results: json!({
                "slope": rep.fit.map(|f| f.slope),
                "fit": rep.fit,
                "meshes": rep.meshes,
                "errors": rep.errors,
                "reference": rep.reference,
                "uncertified_levels": rep.uncertified_levels,
            }),
            provenance: provenance(plan, &model),
            tables: vec![table],
            checks,
        })
    }
}

pub struct Certify;

impl Experiment for Certify {
    fn name(&self) -> &'static str {
        "certify"
    }
    fn about(&self) -> &'static str {
        "D-solution bound on the finest level and consistency against coarser levels"
    }
    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = defaults("certify", "line", "linear", "euler", "2..6");
        cfg.driver.horizon = Some(1.0 / 16.0);
        cfg.model.omega = Some("linear".into());
        cfg.model.region = Some(2.0);
        cfg
    }
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome> {
        let top = plan.max_level();
        let model = Model::build(plan, top)?;
        let flow = model.flow.as_ref();
        let pi = model.driver.grid().clone();
        let y = run_scheme(flow, &pi, &model.start, Some(plan.region))?;
        let env = flow.envelope();
        let kappa = PowerRemainder::new(model.theta).kappa();
        let cert = certify_d_solution(flow, &y, model.omega.as_ref(), model.varpi.as_ref(), &env, kappa)?;

        let mut consistency = Table::new("consistency", &["level", "mesh", "gap", "worst_ratio", "violations", "pairs"]);
        let mut reports = Vec::new();
        for (level, sigma) in plan.levels.iter().zip(plan.partitions()?) {
            if *level == top {
                continue;
            }
            let rep = consistency_gap(flow, &y, &sigma, model.omega.as_ref(), model.varpi.as_ref(), &env, kappa, cert.k_hat)?;
            consistency.push(vec![
                cell(level),
                cell(rep.mesh),
                cell(rep.gap),
                cell(rep.worst_ratio),
                cell(rep.violations),
                cell(rep.pairs),
            ]);
            reports.push(rep);
        }
        let mut checks = exact_checks(&model, &y)?;
        checks.push(escape_check(&y, plan.region));
        let margin = cert.kappa + 2.0 * cert.delta_t;
        checks.push(if cert.hypotheses_ok {
            Check::invariant("d-solution", cert.pass, format!("K_hat {:.4e} against L {:.4e}", cert.k_hat, cert.l_bound))
        } else {
            Check::new("d-solution", Status::Warn, format!("not certified: kappa + 2 delta_T = {margin:.4} >= 1"))
        });
        let violations: usize = reports.iter().map(|r| r.violations).sum();
        checks.push(if cert.pass {
            Check::invariant("consistency", violations == 0, format!("{violations} pairs above the consistency bound"))
        } else {
            Check::new("consistency", Status::Warn, "skipped: the D-solution bound is not certified")
        });
        Ok(Outcome {
            results: json!({ "d_solution": cert, "consistency": reports, "escapes": y.escapes }),
            provenance: provenance(plan, &model),
            tables: vec![scheme_table("scheme", &y), consistency],
            checks,
        })
    }
}

pub struct Stability;

impl Experiment for Stability {
    fn name(&self) -> &'static str {
        "stability"
    }
    fn about(&self) -> &'static str {
        "sampled Lipschitz constant of the discrete sewing map, Cauchy ladder and Lambda-norm bounds"
    }
    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = defaults("stability", "line", "linear", "davie", "2..5");
        cfg.driver.horizon = Some(1.0 / 64.0);
        cfg.model.omega = Some("linear".into());
        cfg.model.start = Some(vec![0.5]);
        cfg.model.region = Some(2.0);
        cfg.sampling.pairs = Some(24);
        cfg
    }
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome> {
        let top = plan.max_level();
        let model = Model::build(plan, top)?;
        let flow = model.flow.as_ref();
        let (omega, varpi) = (model.omega.as_ref(), model.varpi.as_ref());
        let pi = model.driver.grid().clone();
        let y = run_scheme(flow, &pi, &model.start, Some(plan.region))?;
        let env = flow.envelope();
        let kappa = PowerRemainder::new(model.theta).kappa();
        let cert = certify_d_solution(flow, &y, omega, varpi, &env, kappa)?;
        let sampler = TripleSampler::for_flow(flow, plan.region, plan.samples, plan.seed);
        let def = defect(flow, omega, varpi, &sampler);
        let fp = four_point(flow, omega, varpi, &QuadSampler::new(sampler));
        let ing = EllIngredients {
            delta_t: env.delta.eval(plan.horizon),
            defect_lip: def.lip_over_varpi,
            phi_star_k: fp.phi_star_at(cert.k_hat),
            kappa,
            varpi_total: varpi.eval(omega.eval(0.0, plan.horizon)),
        };
        let pair_sampler = PathPairSampler {
            count: plan.pairs,
            offset: 0.3,
            noise: 0.5,
            seed: plan.seed,
        };
        let pairs = sample_pairs(flow, &pi, &model.start, &pair_sampler, model.omega.clone(), model.varpi.clone())?;
        let lip = lipschitz_phi_pi(flow, &pairs, ing, plan.seed)?;

        let coarse: Vec<_> = plan.partitions()?.into_iter().filter(|p| p.intervals() < pi.intervals()).collect();
        let ladder = if coarse.is_empty() { Vec::new() } else { cauchy_ladder(flow, &coarse, &pi, &model.start, omega, varpi)? };
        let mut table = Table::new("cauchy", &["mesh", "mu", "distance", "ratio"]);
        for row in &ladder {
            table.push(vec![cell(row.mesh), cell(row.mu), cell(row.distance), cell(row.ratio)]);
        }

        let gauge = PowerRemainder::new(model.holder);
        let c_lambda = sample_c_lambda(flow, &pi, &gauge, omega, 1.0, 4.0, plan.samples.min(400), plan.seed);
        let lam = lambda_norm(&y, &gauge, omega, varpi, cert.k_hat, c_lambda, 1.0);

        let mut checks = exact_checks(&model, &y)?;
        checks.push(escape_check(&y, plan.region));
        let lip_detail = format!("sampled {:.4e} against bound {:.4e}", lip.ell_hat, lip.ell_t_formula);
        checks.push(if !cert.hypotheses_ok {
            Check::new("lipschitz", Status::Warn, format!("not certified: kappa + 2 delta_T >= 1; {lip_detail}"))
        } else if lip.ell_t_formula >= 1.0 {
            Check::new("lipschitz", Status::Warn, format!("bound is not a contraction; {lip_detail}"))
        } else {
            Check::invariant("lipschitz", lip.ell_hat <= lip.ell_t_formula, lip_detail)
        });
        checks.push(if lam.certified {
            Check::invariant(
                "lambda-norm",
                lam.sup_norm <= lam.bound_sup && lam.lambda_norm <= lam.bound_lambda,
                format!("Lambda {:.4e} <= {:.4e}, sup {:.4e} <= {:.4e}", lam.lambda_norm, lam.bound_lambda, lam.sup_norm, lam.bound_sup),
            )
        } else {
            Check::new("lambda-norm", Status::Warn, "bounds not certified for this run")
        });
        let mut provenance = provenance(plan, &model);
        provenance["samples"] = json!(plan.samples);
        provenance["pairs"] = json!(plan.pairs);
        provenance["lambda_samples"] = json!(plan.samples.min(400));
        Ok(Outcome {
            results: json!({
                "lipschitz": lip,
                "d_solution": cert,
                "defect": def,
                "four_point_second_order": fp.second_order,
                "lambda": lam,
                "cauchy": ladder,
            }),
            provenance,
            tables: vec![table, scheme_table("scheme", &y)],
            checks,
        })
    }
}

pub struct Perturb;

impl Experiment for Perturb {
    fn name(&self) -> &'static str {
        "perturb"
    }
    fn about(&self) -> &'static str {
        "distance between plain and perturbed schemes against the perturbation size"
    }
    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = defaults("perturb", "line", "linear", "euler:alpha=0.6", "6..10");
        cfg.driver.horizon = Some(0.9);
        cfg.model.omega = Some("linear".into());
        cfg.model.perturb = Some("quant:bits=20:rounding=chop".into());
        cfg.model.start = Some(vec![0.5]);
        cfg.model.region = Some(2.0);
        cfg
    }
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome> {
        let model = Model::build(plan, plan.max_level())?;
        let flow = model.flow.as_ref();
        let eps = model.perturbation(plan)?;
        let mut table = Table::new("perturb", &["level", "mesh", "sup_distance", "eta", "ratio"]);
        let mut rows = Vec::new();
        let mut last = None;
        for (level, pi) in plan.levels.iter().zip(plan.partitions()?) {
            let y = run_scheme(flow, &pi, &model.start, Some(plan.region))?;
            let z = perturbed_scheme(flow, eps.as_ref(), &pi, &model.start, Some(plan.region))?;
            let sampler = TripleSampler::new(pi.points().to_vec(), flow.dim(), plan.region, plan.samples, plan.seed);
            let pn = perturbation_norm(eps.as_ref(), flow, model.omega.as_ref(), model.varpi.as_ref(), &sampler);
            let dist = y.sup_distance(&z);
            let ratio = dist / pn.eta;
            table.push(vec![cell(level), cell(pi.mesh()), cell(dist), cell(pn.eta), cell(ratio)]);
            rows.push(json!({ "level": level, "sup_distance": dist, "norm": pn, "ratio": ratio }));
            last = Some((y, dist, pn.eta, ratio));
        }
        let (y, _, _, _) = last.as_ref().expect("levels are non-empty");
        let mut checks = exact_checks(&model, y)?;
        checks.push(escape_check(y, plan.region));
        let etas: Vec<f64> = rows.iter().map(|r| r["norm"]["eta"].as_f64().unwrap_or(f64::NAN)).collect();
        let dists: Vec<f64> = rows.iter().map(|r| r["sup_distance"].as_f64().unwrap_or(f64::NAN)).collect();
        let spread = if etas.iter().all(|e| *e > 0.0) {
            let ratios: Vec<f64> = dists.iter().zip(&etas).map(|(d, e)| d / e).collect();
            let spread = ratio_spread(&ratios);
            checks.push(Check::expect("ratio-spread", spread <= 2.0, format!("max/min of distance/eta = {spread:.4}")));
            Some(spread)
        } else {
            checks.push(Check::invariant(
                "zero-perturbation",
                dists.iter().all(|d| *d == 0.0),
                "a perturbation of norm zero leaves the scheme unchanged",
            ));
            None
        };
        let mut provenance = provenance(plan, &model);
        provenance["perturbation"] = json!(plan.perturb);
        provenance["samples"] = json!(plan.samples);
        Ok(Outcome {
            results: json!({ "levels": rows, "ratio_spread": spread }),
            provenance,
            tables: vec![table],
            checks,
        })
    }
}

pub struct Brownian;

impl Experiment for Brownian {
    fn name(&self) -> &'static str {
        "brownian"
    }
    fn about(&self) -> &'static str {
        "Milstein scheme against Brownian drivers: pathwise rates (rate) or local error moments (psi)"
    }
    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = defaults("brownian", "ebm:sub=1:p=2.1", "linear", "davie", "4..10");
        cfg.sampling.paths = Some(20);
        cfg.sampling.moment = Some(2);
        cfg.sampling.start_time = Some(0.0);
        cfg
    }
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome> {
        let spec = plan.driver_spec();
        anyhow::ensure!(spec.name == "ebm", "brownian experiments need an ebm driver, got `{}`", plan.driver);
        let ebm = EbmSpec {
            horizon: plan.horizon,
            sub: spec.usize_or("sub", 1)?,
            p: spec.f64_or("p", 2.1)?,
        };
        let sigma: SharedField = plan.build_field(&plan.field)?;
        let a = plan.start_point(sigma.state_dim())?;
        let top = plan.max_level();
        let extra = plan.reference_level.map_or(2, |r| r - top);
        let reference: Box<dyn ReferenceSolver> = match (scalar_linear(&plan.field), plan.reference.as_str()) {
            (Some(c), "auto" | "exact") => Box::new(ClosedFormLinear { c }),
            (None, "exact") => anyhow::bail!("an exact Brownian reference needs field linear:c=..."),
            _ => Box::new(FineScheme { extra_levels: extra }),
        };
        let gamma = plan.gamma.unwrap_or_else(|| sigma.gamma()).min(1.0);
        let base = json!({
            "sigma": sigma.name(),
            "gamma": gamma,
            "ebm": ebm,
            "levels": plan.levels,
            "sampling_seed": plan.seed,
            "start": a.to_vec(),
        });
        match plan.mode.as_deref() {
            Some("psi") => self.psi(plan, &sigma, reference.as_ref(), &a, &ebm, base),
            _ => self.rate(plan, &sigma, reference.as_ref(), &a, &ebm, gamma, base),
        }
    }
}

impl Brownian {
    #[allow(clippy::too_many_arguments)]
    fn rate(
        &self,
        plan: &Plan,
        sigma: &SharedField,
        reference: &dyn ReferenceSolver,
        a: &Array1<f64>,
        ebm: &EbmSpec,
        gamma: f64,
        mut provenance: Value,
    ) -> anyhow::Result<Outcome> {
        let target = if gamma >= 1.0 { 1.0 } else { milstein_target(gamma, 0.05) };
        let rep = rate_regression(sigma, reference, a, &plan.levels, plan.paths, ebm, target, plan.seed)?;
        let mut table = Table::new("errors", &["path", "seed", "level", "mesh", "error"]);
        for p in &rep.paths {
            for ((level, mesh), err) in rep.levels.iter().zip(&rep.meshes).zip(&p.errors) {
                table.push(vec![cell(p.path), cell(p.seed), cell(level), cell(mesh), cell(err)]);
            }
        }
        let median = rep.median_slope;
        let mut checks = vec![Check::expect(
            "median-slope",
            median.is_some_and(|m| m >= target),
            format!("median slope {median:?} against target {target:.3}"),
        )];
        checks.push(Check::expect(
            "monotone-paths",
            rep.non_monotone == 0,
            format!("{} of {} paths more than doubled an error under refinement", rep.non_monotone, rep.paths.len()),
        ));
        checks.push(Check::expect(
            "non-degenerate",
            rep.degenerate < rep.paths.len(),
            format!("{} paths with errors at machine precision", rep.degenerate),
        ));
        checks.push(Check::expect(
            "finite-errors",
            rep.paths.iter().all(|p| p.finite),
            "every error is finite",
        ));
        provenance["paths"] = json!(plan.paths);
        provenance["reference"] = json!(rep.reference);
        let slopes: Vec<Value> = rep
            .paths
            .iter()
            .map(|p| json!({ "path": p.path, "seed": p.seed, "slope": p.slope, "flag": p.flag }))
            .collect();
        Ok(Outcome {
            results: json!({
                "mode": "rate",
                "median_slope": median,
                "dispersion": rep.dispersion,
                "theta_target": target,
                "degenerate": rep.degenerate,
                "non_monotone": rep.non_monotone,
                "accepted": rep.paths.iter().filter(|p| p.flag == PathFlag::Ok).count(),
                "slopes": slopes,
                "meshes": rep.meshes,
            }),
            provenance,
            tables: vec![table],
            checks,
        })
    }

    fn psi(
        &self,
        plan: &Plan,
        sigma: &SharedField,
        reference: &dyn ReferenceSolver,
        a: &Array1<f64>,
        ebm: &EbmSpec,
        mut provenance: Value,
    ) -> anyhow::Result<Outcome> {
        let s = plan.start_time;
        let pairs: Vec<(f64, f64)> = plan.levels.iter().map(|&k| (s, s + 2f64.powi(-(k as i32)))).collect();
        let fine_level = plan.reference_level.unwrap_or((plan.max_level() + 5).min(20));
        let rep = psi_moment_check(sigma, reference, a, plan.moment, &pairs, plan.samples, fine_level, ebm, plan.seed)?;
        let mut table = Table::new("psi", &["s", "t", "moment", "stderr"]);
        for row in &rep.rows {
            table.push(vec![cell(row.s), cell(row.t), cell(row.moment), cell(row.stderr)]);
        }
        let fitted = rep.fitted_exponent;
        let checks = vec![
            Check::expect(
                "exponent",
                fitted.is_some_and(|e| (e - rep.target).abs() <= 0.15),
                format!("fitted {fitted:?} against {:.3} +- 0.15", rep.target),
            ),
            Check::expect(
                "precision",
                !rep.widened,
                if rep.widened { "some relative standard error above 5%" } else { "relative standard errors within 5%" },
            ),
        ];
        provenance["n_mc"] = json!(rep.n_mc);
        provenance["fine_level"] = json!(rep.fine_level);
        provenance["moment"] = json!(rep.k);
        provenance["reference"] = json!(rep.reference);
        Ok(Outcome {
            results: json!({ "mode": "psi", "report": rep }),
            provenance,
            tables: vec![table],
            checks,
        })
    }
}

pub struct Generic;

impl Experiment for Generic {
    fn name(&self) -> &'static str {
        "generic"
    }
    fn about(&self) -> &'static str {
        "mollification ladder: d_A to the rough flow and the scheme-distance regression"
    }
    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = defaults("generic", "ebm:sub=4:p=2.1", "rough:gamma=0.5", "davie", "8");
        cfg.driver.seed = Some(9);
        cfg.model.mollify = Some("2^-1..2^-6".into());
        cfg.sampling.samples = Some(4000);
        cfg.model.start = Some(vec![0.0]);
        cfg.model.region = Some(2.0);
        cfg
    }
    fn run(&self, plan: &Plan) -> anyhow::Result<Outcome> {
        anyhow::ensure!(!plan.mollify.is_empty(), "generic needs model.mollify radii");
        let model = Model::build(plan, plan.max_level())?;
        let phi = model.flow.clone();
        let (omega, varpi) = (model.omega.as_ref(), model.varpi.as_ref());
        let pi = model.driver.grid().clone();
        let y = run_scheme(phi.as_ref(), &pi, &model.start, Some(plan.region))?;
        let sampler = TripleSampler::for_flow(phi.as_ref(), plan.region, plan.samples, plan.seed);
        let mut table = Table::new("generic", &["h", "d_a", "sup_distance", "lhs", "start_gap"]);
        let mut rows = Vec::new();
        let mut distances = Vec::new();
        for &h in &plan.mollify {
            let psi = model.sibling(plan, Arc::new(Mollified::new(model.field.clone(), h)?))?;
            let dist = d_a(psi.as_ref(), phi.as_ref(), omega, varpi, &sampler);
            let row = scheme_distance(phi.as_ref(), psi.as_ref(), &pi, &model.start, &model.start, omega, varpi, dist.value)?;
            table.push(vec![cell(h), cell(dist.value), cell(row.sup_dist), cell(row.lhs), cell(row.start_gap)]);
            distances.push(json!({ "h": h, "distance": dist }));
            rows.push(row);
        }
        let das: Vec<f64> = rows.iter().map(|r| r.d_a).collect();
        let fit = fit_scheme_distance(rows)?;
        let self_distance = d_a(phi.as_ref(), phi.as_ref(), omega, varpi, &sampler).value;

        let mut checks = exact_checks(&model, &y)?;
        checks.push(Check::invariant("self-distance", self_distance == 0.0, format!("d_A(phi, phi) = {self_distance:e}")));
        checks.push(Check::expect(
            "d_a-decreasing",
            das.windows(2).all(|w| w[1] < w[0]),
            format!("d_A along the ladder: {das:?}"),
        ));
        let r2 = fit.linear.map(|l| l.r_squared);
        checks.push(Check::expect(
            "regression",
            r2.is_some_and(|r| r >= 0.9),
            format!("R^2 of sup distance on d_A: {r2:?}"),
        ));
        let mut provenance = provenance(plan, &model);
        provenance["samples"] = json!(plan.samples);
        provenance["mollify"] = json!(plan.mollify);
        Ok(Outcome {
            results: json!({ "distances": distances, "regression": fit }),
            provenance,
            tables: vec![table],
            checks,
        })
    }
}
