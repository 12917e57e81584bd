//! A merged configuration checked and parsed into the values experiments consume.

use std::sync::Arc;

use ndarray::Array1;
use sewing_core::control::{Control, Remainder};
use sewing_core::drivers::DriverSource;
use sewing_core::field::SharedField;
use sewing_core::flow::SharedFlow;
use sewing_core::partition::Partition;
use sewing_core::perturb::SharedPerturbation;
use sewing_core::registry::{self, ControlContext, FlowContext, PerturbationContext, Spec};
use sewing_core::rough_path::GridRoughPath;

use crate::config::{check_field, known_name, parse_ladder, parse_levels, ConfigError, ExperimentConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    /// the merged configuration, every default filled in
    pub config: ExperimentConfig,
    pub experiment: String,
    pub mode: Option<String>,
    pub driver: String,
    pub driver_seed: u64,
    pub horizon: f64,
    pub field: String,
    pub flow: String,
    pub omega: String,
    pub varpi: Option<String>,
    pub perturb: String,
    pub mollify: Vec<f64>,
    pub start: Vec<f64>,
    pub region: f64,
    pub gamma: Option<f64>,
    pub levels: Vec<u32>,
    pub reference: String,
    pub reference_level: Option<u32>,
    pub seed: u64,
    pub samples: usize,
    pub pairs: usize,
    pub paths: usize,
    pub moment: u32,
    pub start_time: f64,
    pub run: String,
    pub out_dir: Option<String>,
}

fn need<T: Clone>(v: &Option<T>, field: &str) -> Result<T, ConfigError> {
    v.clone().ok_or_else(|| ConfigError::at(field, "missing and the experiment has no default"))
}

fn positive(v: f64, field: &str) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(field, format!("must be positive, got {v}")))
    }
}

impl Plan {
    /// `cfg` must already carry the experiment defaults.
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let m = &cfg.model;
        let driver = need(&cfg.driver.spec, "driver.spec")?;
        let spec = known_name(registry::drivers().entries(), "driver", &driver).map_err(|e| ConfigError::at("driver.spec", e))?;
        // a `seed=` inside the driver spec wins over driver.seed
        let driver_seed = spec
            .u64_or("seed", cfg.driver.seed.unwrap_or(0))
            .map_err(|e| ConfigError::at("driver.spec", e.to_string()))?;
        if cfg.experiment == "brownian" && spec.name != "ebm" {
            return Err(ConfigError::at("driver.spec", format!("brownian experiments need an ebm driver, got `{driver}`")));
        }
        let field = need(&m.field, "model.field")?;
        check_field(&field).map_err(|e| ConfigError::at("model.field", e))?;
        let flow = need(&m.flow, "model.flow")?;
        known_name(registry::flows().entries(), "flow", &flow).map_err(|e| ConfigError::at("model.flow", e))?;
        let omega = need(&m.omega, "model.omega")?;
        known_name(registry::controls().entries(), "control", &omega).map_err(|e| ConfigError::at("model.omega", e))?;
        if let Some(v) = &m.varpi {
            registry::remainders().build(v).map_err(|e| ConfigError::at("model.varpi", e.to_string()))?;
        }
        let perturb = m.perturb.clone().unwrap_or_else(|| "zero".into());
        known_name(registry::perturbations().entries(), "perturbation", &perturb)
            .map_err(|e| ConfigError::at("model.perturb", e))?;
        let mollify = match &m.mollify {
            Some(text) => parse_ladder(text).map_err(|e| ConfigError::at("model.mollify", e))?,
            None => Vec::new(),
        };
        let levels_text = need(&cfg.grid.levels, "grid.levels")?;
        let levels = parse_levels(&levels_text).map_err(|e| ConfigError::at("grid.levels", e))?;
        let reference = cfg.grid.reference.clone().unwrap_or_else(|| "auto".into());
        if !["auto", "exact", "finer"].contains(&reference.as_str()) {
            return Err(ConfigError::at("grid.reference", format!("`{reference}` is not one of auto, exact, finer")));
        }
        if let Some(r) = cfg.grid.reference_level {
            if r <= *levels.last().unwrap() || r > 24 {
                return Err(ConfigError::at("grid.reference_level", format!("{r} must exceed every level and stay <= 24")));
            }
        }
        let mode = cfg.mode.clone();
        match (cfg.experiment.as_str(), mode.as_deref()) {
            ("brownian", Some("rate" | "psi")) => {}
            ("brownian", other) => {
                return Err(ConfigError::at("mode", format!("brownian needs mode rate or psi, got {other:?}")));
            }
            (_, Some(_)) => return Err(ConfigError::at("mode", format!("`{}` takes no mode", cfg.experiment))),
            _ => {}
        }
        let s = &cfg.sampling;
        let run = match &cfg.output.run {
            Some(r) => r.clone(),
            None => format!("{}-seed{}", cfg.experiment, s.seed.unwrap_or(0)),
        };
        if run.is_empty() || run.starts_with('.') || run.contains(['/', '\\']) {
            return Err(ConfigError::at("output.run", format!("`{run}` is not a plain directory name")));
        }
        let samples = s.samples.unwrap_or(2000);
        if samples < 2 {
            return Err(ConfigError::at("sampling.samples", "need at least 2 samples"));
        }
        Ok(Self {
            config: cfg.clone(),
            experiment: cfg.experiment.clone(),
            mode,
            driver,
            driver_seed,
            horizon: positive(cfg.driver.horizon.unwrap_or(1.0), "driver.horizon")?,
            field,
            flow,
            omega,
            varpi: m.varpi.clone(),
            perturb,
            mollify,
            start: m.start.clone().unwrap_or_else(|| vec![1.0]),
            region: positive(m.region.unwrap_or(4.0), "model.region")?,
            gamma: m.gamma,
            levels,
            reference,
            reference_level: cfg.grid.reference_level,
            seed: s.seed.unwrap_or(0),
            samples,
            pairs: s.pairs.unwrap_or(24).max(1),
            paths: s.paths.unwrap_or(20).max(1),
            moment: s.moment.unwrap_or(2).max(1),
            start_time: s.start_time.unwrap_or(0.0),
            run,
            out_dir: cfg.output.dir.clone(),
        })
    }

    pub fn max_level(&self) -> u32 {
        *self.levels.last().expect("levels are non-empty")
    }

    pub fn partitions(&self) -> anyhow::Result<Vec<Partition>> {
        Ok(self.levels.iter().map(|&l| Partition::dyadic(l, self.horizon)).collect::<Result<_, _>>()?)
    }

    pub fn driver_spec(&self) -> Spec {
        self.driver.parse().expect("checked when resolving")
    }

    /// Driver sampled on the dyadic grid of `level`.
    pub fn build_driver(&self, level: u32) -> anyhow::Result<(Arc<GridRoughPath>, f64)> {
        let spec = self.driver_spec();
        spec.raw("seed");
        let source: Arc<dyn DriverSource> = registry::drivers().build_spec(&spec, &())?;
        let grid = Partition::dyadic(level, self.horizon)?;
        let x = source.build(&grid, self.driver_seed)?;
        Ok((Arc::new(x), source.holder()))
    }

    pub fn build_field(&self, text: &str) -> anyhow::Result<SharedField> {
        Ok(registry::fields().build(text)?)
    }

    pub fn start_point(&self, dim: usize) -> anyhow::Result<Array1<f64>> {
        match self.start.len() {
            1 => Ok(Array1::from_elem(dim, self.start[0])),
            n if n == dim => Ok(Array1::from(self.start.clone())),
            n => anyhow::bail!("model.start has {n} entries, the state has dimension {dim}"),
        }
    }
}

/// The driver, control, remainder and flow of one plan.
pub struct Model {
    pub driver: Arc<GridRoughPath>,
    pub holder: f64,
    pub field: SharedField,
    pub omega: Arc<dyn Control>,
    pub varpi: Arc<dyn Remainder>,
    pub theta: f64,
    pub flow: SharedFlow,
    pub start: Array1<f64>,
}

impl Model {
    pub fn build(plan: &Plan, level: u32) -> anyhow::Result<Self> {
        let (driver, holder) = plan.build_driver(level)?;
        let field = plan.build_field(&plan.field)?;
        Self::with_field(plan, driver, holder, field)
    }

    pub fn with_field(plan: &Plan, driver: Arc<GridRoughPath>, holder: f64, field: SharedField) -> anyhow::Result<Self> {
        let omega = registry::controls().build_with(&plan.omega, &ControlContext { driver: driver.clone() })?;
        let ctx = FlowContext {
            field: field.clone(),
            driver: driver.clone(),
            omega: omega.clone(),
            holder,
            region: plan.region,
        };
        let flow = registry::flows().build_with(&plan.flow, &ctx)?;
        let varpi_text = match (&plan.varpi, flow.remainder_theta()) {
            (Some(v), _) => v.clone(),
            (None, Some(theta)) => format!("power:theta={theta}"),
            (None, None) => anyhow::bail!("flow `{}` has no natural remainder; set model.varpi", plan.flow),
        };
        let varpi = registry::remainders().build(&varpi_text)?;
        let theta: Spec = varpi_text.parse()?;
        let theta = theta.f64_or("theta", 1.5)?;
        let start = plan.start_point(flow.dim())?;
        Ok(Self {
            driver,
            holder,
            field,
            omega,
            varpi,
            theta,
            flow,
            start,
        })
    }

    /// Same driver and control, another field.
    pub fn sibling(&self, plan: &Plan, field: SharedField) -> anyhow::Result<SharedFlow> {
        let ctx = FlowContext {
            field,
            driver: self.driver.clone(),
            omega: self.omega.clone(),
            holder: self.holder,
            region: plan.region,
        };
        Ok(registry::flows().build_with(&plan.flow, &ctx)?)
    }

    pub fn perturbation(&self, plan: &Plan) -> anyhow::Result<SharedPerturbation> {
        let ctx = PerturbationContext {
            dim: self.flow.dim(),
            omega: self.omega.clone(),
            varpi: self.varpi.clone(),
        };
        Ok(registry::perturbations().build_with(&plan.perturb, &ctx)?)
    }
}
