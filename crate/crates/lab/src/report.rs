//! Experiment outcomes and the artifacts they leave on disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::plan::Plan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    /// a check whose hypotheses did not hold, or an empirical expectation that was missed
    Warn,
    /// a certified invariant was violated
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, status: Status, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status,
            detail: detail.into(),
        }
    }

    /// Fail unless `ok`.
    pub fn invariant(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self::new(name, if ok { Status::Pass } else { Status::Fail }, detail)
    }

    /// Warn unless `ok`.
    pub fn expect(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self::new(name, if ok { Status::Pass } else { Status::Warn }, detail)
    }
}

/// A CSV table; cells are already formatted.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Formats numbers for CSV cells; Rust prints the shortest string that reads back exactly.
pub fn cell(v: impl ToString) -> String {
    v.to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub results: Value,
    /// seeds, sample counts and grids behind every number in `results`
    pub provenance: Value,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn status(&self) -> Status {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Status::Pass)
    }
}

/// Finished run: where it landed and how it went.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub status: Status,
    pub checks: Vec<Check>,
}

pub fn summary(plan: &Plan, outcome: &Outcome) -> Value {
    let mut files: Vec<String> = outcome.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
    files.push("config.toml".into());
    files.push("summary.json".into());
    files.sort();
    json!({
        "experiment": plan.experiment,
        "mode": plan.mode,
        "version": env!("CARGO_PKG_VERSION"),
        "status": outcome.status(),
        "checks": outcome.checks,
        "config": plan.config,
        "provenance": outcome.provenance,
        "results": outcome.results,
        "artifacts": files,
    })
}

/// Writes every artifact into a staging directory, then renames it to `root/run`.
/// Nothing is written when the run itself failed.
pub fn write_artifacts(root: &Path, plan: &Plan, outcome: &Outcome) -> std::io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let dest = root.join(&plan.run);
    let staging = root.join(format!(".{}.partial-{}", plan.run, std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let write = || -> std::io::Result<()> {
        for table in &outcome.tables {
            fs::write(staging.join(format!("{}.csv", table.name)), table.to_csv())?;
        }
        fs::write(staging.join("config.toml"), plan.config.to_toml())?;
        let mut text = serde_json::to_string_pretty(&summary(plan, outcome)).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(staging.join("summary.json"), text)
    };
    if let Err(e) = write() {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dest.exists() {
        fs::remove_dir_all(&dest)?;
    }
    fs::rename(&staging, &dest)?;
    Ok(dest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_status() {
        let mut t = Table::new("rows", &["mesh", "error"]);
        t.push(vec![cell(0.5), cell(1e-3)]);
        assert_eq!(t.to_csv(), "mesh,error\n0.5,0.001\n");
        let mut o = Outcome {
            results: Value::Null,
            provenance: Value::Null,
            tables: vec![t],
            checks: vec![Check::invariant("a", true, ""), Check::expect("b", false, "")],
        };
        assert_eq!(o.status(), Status::Warn);
        o.checks.push(Check::invariant("c", false, ""));
        assert_eq!(o.status(), Status::Fail);
    }
}
