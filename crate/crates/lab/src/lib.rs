//! Experiment harness: configs in, CSV and JSON artifacts out.

pub mod config;
pub mod experiments;
pub mod plan;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::Context;

pub use config::{ConfigError, ExperimentConfig};
pub use experiments::{registry, Experiment};
pub use plan::Plan;
pub use report::{Check, Outcome, RunRecord, Status};

/// Overrides the artifact root unless `--out` is given.
pub const OUT_ENV: &str = "SEWING_LAB_OUT";
pub const DEFAULT_OUT: &str = "lab-runs";

/// Fills in the experiment's defaults and checks every key.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let experiment = experiments::find(&cfg.experiment).ok_or_else(|| {
        let names: Vec<&str> = registry().iter().map(|e| e.name()).collect();
        ConfigError::at("experiment", format!("unknown experiment `{}`, expected one of {}", cfg.experiment, names.join(", ")))
    })?;
    Plan::resolve(&cfg.merged(&experiment.defaults()))
}

/// Reads and prepares a config file; diagnostics point at the offending line.
pub fn load(path: &Path) -> anyhow::Result<Plan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
    prepare(&cfg).map_err(|e| e.located(&text)).with_context(|| format!("in {}", path.display()))
}

/// `--out`, then the environment, then `output.dir`, then the default.
pub fn output_root(cli: Option<&Path>, plan: &Plan) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(plan.out_dir.as_deref().unwrap_or(DEFAULT_OUT))
}

/// Runs one plan and writes its artifacts under `root/<run>`.
pub fn execute(plan: &Plan, root: &Path) -> anyhow::Result<RunRecord> {
    let experiment = experiments::find(&plan.experiment).expect("prepared plans name a registered experiment");
    let outcome = experiment.run(plan).with_context(|| format!("run `{}` failed", plan.run))?;
    let dir = report::write_artifacts(root, plan, &outcome).with_context(|| format!("cannot write artifacts under {}", root.display()))?;
    Ok(RunRecord {
        dir,
        status: outcome.status(),
        checks: outcome.checks,
    })
}

/// Independent runs on their own threads; every run lands in its own directory.
pub fn execute_all(plans: &[(Plan, PathBuf)]) -> Vec<anyhow::Result<RunRecord>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = plans.iter().map(|(plan, root)| scope.spawn(move || execute(plan, root))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("run panicked"))))
            .collect()
    })
}

/// 0 for passing or merely uncertified runs, 2 when a certified invariant broke.
pub fn exit_code(status: Status) -> u8 {
    match status {
        Status::Pass | Status::Warn => 0,
        Status::Fail => 2,
    }
}
