//! Experiment configuration: a sectioned TOML file, every key optional.
//!
//! Missing keys take the defaults of the chosen experiment, see [`ExperimentConfig::merged`].

use std::fmt;

use serde::{Deserialize, Serialize};
use sewing_core::registry::{self, parse_number, Spec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// `rate` or `psi` for the brownian experiment
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub driver: DriverSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub sampling: SamplingSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    /// defaults to the flow's own remainder exponent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varpi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<String>,
    /// mollification radii, `2^-1..2^-6` or a comma list
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<f64>,
    /// Hoelder exponent of the derivative of sigma, for rate targets
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// dyadic levels, `4..10` (inclusive) or a comma list
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<String>,
    /// `auto`, `exact`, `finer`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_level: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_time: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// A rejected configuration, pointing at the offending key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// dotted key such as `model.field`
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " ({field})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn at(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_string()),
            line: None,
            message: message.into(),
        }
    }

    /// Fills in the line of `field` in the source text.
    pub fn located(mut self, text: &str) -> Self {
        if self.line.is_none() {
            self.line = self.field.as_deref().and_then(|f| locate(text, f));
        }
        self
    }
}

/// 1-based line of `section.key` (or a top-level key) in TOML text.
pub fn locate(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.rsplit_once('.').unwrap_or(("", dotted));
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section && line.split('=').next().is_some_and(|k| k.trim() == key) {
            return Some(i + 1);
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Self::default()
        }
    }

    /// Parses TOML text; unknown keys and type errors carry their line.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| line_of(text, s.start));
            ConfigError {
                field: None,
                line,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs contain only strings, numbers and arrays")
    }

    /// `self` on top of `defaults`, key by key.
    pub fn merged(&self, defaults: &ExperimentConfig) -> ExperimentConfig {
        let over = toml::Table::try_from(self).expect("serializable");
        let mut base = toml::Table::try_from(defaults).expect("serializable");
        for (k, v) in over {
            match (base.get_mut(&k), v) {
                (Some(toml::Value::Table(b)), toml::Value::Table(o)) => b.extend(o),
                (_, v) => {
                    base.insert(k, v);
                }
            }
        }
        toml::Value::Table(base).try_into().expect("merge of two valid configs")
    }
}

/// Inclusive `lo..hi` or a comma list of dyadic levels.
pub fn parse_levels(text: &str) -> Result<Vec<u32>, String> {
    let bad = |_| format!("cannot read levels `{text}`");
    let levels: Vec<u32> = match text.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi): (u32, u32) = (lo.trim().parse().map_err(bad)?, hi.trim().parse().map_err(bad)?);
            (lo..=hi).collect()
        }
        None => text.split(',').map(|l| l.trim().parse::<u32>().map_err(bad)).collect::<Result<_, _>>()?,
    };
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("levels `{text}` must be increasing and non-empty"));
    }
    if levels.iter().any(|&l| l > 24) {
        return Err(format!("levels `{text}` go beyond 2^24 intervals"));
    }
    Ok(levels)
}

/// `2^-a..2^-b` walks the powers of two in between; otherwise a comma list of numbers.
pub fn parse_ladder(text: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("cannot read ladder `{text}`");
    let text = text.trim();
    let text = text.strip_prefix("h=").unwrap_or(text);
    let values = match text.split_once("..") {
        Some((lo, hi)) => {
            let exp = |s: &str| -> Result<i32, String> {
                s.trim().strip_prefix("2^").ok_or_else(bad)?.parse().map_err(|_| bad())
            };
            let (a, b) = (exp(lo)?, exp(hi)?);
            let step = if b >= a { 1 } else { -1 };
            let mut out = vec![2f64.powi(a)];
            let mut k = a;
            while k != b {
                k += step;
                out.push(2f64.powi(k));
            }
            out
        }
        None => text.split(',').map(|v| parse_number(v).map_err(|_| bad())).collect::<Result<Vec<f64>, _>>()?,
    };
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(format!("ladder `{text}` needs positive radii"));
    }
    Ok(values)
}

/// Checks that `text` names an entry of the registry with this kind, without building it.
pub fn known_name(entries: impl Iterator<Item = (&'static str, &'static str)>, kind: &str, text: &str) -> Result<Spec, String> {
    let spec: Spec = text.parse().map_err(|e: sewing_core::SewingError| e.to_string())?;
    let mut names = Vec::new();
    for (name, _) in entries {
        if name == spec.name {
            return Ok(spec);
        }
        names.push(name);
    }
    Err(format!("unknown {kind} `{}`, expected one of {}", spec.name, names.join(", ")))
}

/// Builds a field spec once to reject bad names and parameters early.
pub fn check_field(text: &str) -> Result<(), String> {
    registry::fields().build(text).map(|_| ()).map_err(|e| e.to_string())
}
