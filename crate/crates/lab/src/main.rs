use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sewing_core::registry;
use sewing_lab::{execute_all, exit_code, output_root, prepare, registry as experiments, ExperimentConfig, Plan, Status};

#[derive(Parser)]
#[command(name = "sewing-lab", version, about = "Sewing experiments: schemes, certificates, stability and Brownian rates")]
struct Cli {
    /// Artifact root; overrides SEWING_LAB_OUT and output.dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scheme error across dyadic levels
    Converge(Flags),
    /// D-solution bound and consistency gaps
    Certify(Flags),
    /// Lipschitz constant of the sewing map, Cauchy ladder, Lambda norm
    Stability(Flags),
    /// Plain against perturbed schemes
    Perturb(Flags),
    /// Milstein rates or local error moments along Brownian drivers
    Brownian {
        #[arg(value_enum)]
        mode: Mode,
        #[command(flatten)]
        flags: Flags,
    },
    /// Mollification ladder and scheme-distance regression
    Generic(Flags),
    /// Run experiments from config files, concurrently
    Run {
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
    },
    /// Registered experiments, fields, drivers, flows, controls, remainders and perturbations
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rate,
    Psi,
}

#[derive(Args, Default)]
struct Flags {
    /// e.g. `ebm:d=1:sub=4:p=2.1`, `lift:file=path.bin`
    #[arg(long)]
    driver: Option<String>,
    /// Sampling seed; also the driver seed unless --driver-seed is given
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    driver_seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// e.g. `linear:c=1`, `rough:gamma=0.5`, `sinrot`
    #[arg(long, alias = "sigma")]
    field: Option<String>,
    /// `davie`, `euler[:alpha=..]`, `exact-linear:c=..`
    #[arg(long)]
    flow: Option<String>,
    /// `pvar` or `linear[:scale=..]`
    #[arg(long)]
    omega: Option<String>,
    /// e.g. `pow:theta=1.25`
    #[arg(long)]
    varpi: Option<String>,
    /// e.g. `quant:bits=20`, `uniform:eta=1e-3`
    #[arg(long)]
    perturb: Option<String>,
    /// Radii `2^-1..2^-6`, `h=0.25` or a comma list
    #[arg(long)]
    mollify: Option<String>,
    /// Start point, one value per state component or one for all
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    start: Option<Vec<f64>>,
    #[arg(long)]
    region: Option<f64>,
    /// Hoelder exponent of the derivative of sigma
    #[arg(long)]
    gamma: Option<f64>,
    /// Dyadic levels, `4..10` or `3,5,7`
    #[arg(long)]
    levels: Option<String>,
    /// `auto`, `exact` or `finer`
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    reference_level: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    /// Moment order of the local error check
    #[arg(long)]
    moment: Option<u32>,
    #[arg(long)]
    start_time: Option<f64>,
    /// Run directory name under the artifact root
    #[arg(long)]
    run: Option<String>,
    /// Print the resolved config and exit
    #[arg(long)]
    dry_run: bool,
}

impl Flags {
    fn config(&self, experiment: &str, mode: Option<&str>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(experiment);
        cfg.mode = mode.map(str::to_string);
        cfg.driver.spec = self.driver.clone();
        cfg.driver.seed = self.driver_seed.or(self.seed);
        cfg.driver.horizon = self.horizon;
        cfg.model.field = self.field.clone();
        cfg.model.flow = self.flow.clone();
        cfg.model.omega = self.omega.clone();
        cfg.model.varpi = self.varpi.clone();
        cfg.model.perturb = self.perturb.clone();
        cfg.model.mollify = self.mollify.clone();
        cfg.model.start = self.start.clone();
        cfg.model.region = self.region;
        cfg.model.gamma = self.gamma;
        cfg.grid.levels = self.levels.clone();
        cfg.grid.reference = self.reference.clone();
        cfg.grid.reference_level = self.reference_level;
        cfg.sampling.seed = self.seed;
        cfg.sampling.samples = self.samples;
        cfg.sampling.pairs = self.pairs;
        cfg.sampling.paths = self.paths;
        cfg.sampling.moment = self.moment;
        cfg.sampling.start_time = self.start_time;
        cfg.output.run = self.run.clone();
        cfg
    }
}

fn list() {
    println!("experiments:");
    for e in experiments() {
        println!("  {:<12} {}", e.name(), e.about());
    }
    fn section<C>(title: &str, reg: &registry::Registry<C, impl Sized>) {
        println!("{title}:");
        for (name, help) in reg.entries() {
            println!("  {name:<12} {help}");
        }
    }
    section("fields", &registry::fields());
    section("drivers", &registry::drivers());
    section("flows", &registry::flows());
    section("controls", &registry::controls());
    section("remainders", &registry::remainders());
    section("perturbations", &registry::perturbations());
}

fn report(plans: &[(Plan, PathBuf)]) -> ExitCode {
    let mut worst = Status::Pass;
    let mut errors = 0;
    for ((plan, _), result) in plans.iter().zip(execute_all(plans)) {
        match result {
            Ok(record) => {
                for check in &record.checks {
                    match check.status {
                        Status::Pass => {}
                        Status::Warn => eprintln!("warning [{}] {}: {}", plan.run, check.name, check.detail),
                        Status::Fail => eprintln!("VIOLATION [{}] {}: {}", plan.run, check.name, check.detail),
                    }
                }
                println!("{}: {:?} -> {}", plan.run, record.status, record.dir.display());
                worst = worst.max(record.status);
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                errors += 1;
            }
        }
    }
    if errors > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::from(exit_code(worst))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (configs, dry_run) = match &cli.command {
        Command::List => {
            list();
            return ExitCode::SUCCESS;
        }
        Command::Run { configs } => {
            let mut plans = Vec::new();
            for path in configs {
                match sewing_lab::load(path) {
                    Ok(p) => plans.push(p),
                    Err(e) => {
                        eprintln!("error: {e:#}");
                        return ExitCode::from(1);
                    }
                }
            }
            (plans, false)
        }
        cmd => {
            let (name, mode, flags) = match cmd {
                Command::Converge(f) => ("converge", None, f),
                Command::Certify(f) => ("certify", None, f),
                Command::Stability(f) => ("stability", None, f),
                Command::Perturb(f) => ("perturb", None, f),
                Command::Generic(f) => ("generic", None, f),
                Command::Brownian { mode, flags } => ("brownian", Some(mode.to_possible_value().unwrap().get_name().to_string()), flags),
                Command::Run { .. } | Command::List => unreachable!(),
            };
            match prepare(&flags.config(name, mode.as_deref())) {
                Ok(plan) => (vec![plan], flags.dry_run),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
        }
    };
    if dry_run {
        for plan in &configs {
            print!("{}", plan.config.to_toml());
        }
        return ExitCode::SUCCESS;
    }
    let plans: Vec<(Plan, PathBuf)> = configs
        .into_iter()
        .map(|p| {
            let root = output_root(cli.out.as_deref(), &p);
            (p, root)
        })
        .collect();
    let mut seen = BTreeSet::new();
    for (plan, root) in &plans {
        if !seen.insert(root.join(&plan.run)) {
            eprintln!("error: two runs write to {}; set output.run", root.join(&plan.run).display());
            return ExitCode::from(1);
        }
    }
    report(&plans)
}
