//! Scheme error against a reference across nested partitions.

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SewingError};
use crate::flow::{norm, AlmostFlow};
use crate::partition::Partition;
use crate::sewing::{run_scheme, SchemePath};
use crate::stats::{log_log_fit, LinearFit};

/// Where the errors are measured against.
pub enum Reference<'a> {
    /// a closed-form solution `t -> y_t`
    Exact(&'a (dyn Fn(f64) -> Array1<f64> + Sync)),
    /// the scheme of the same flow on a finer partition
    Finer(Partition),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub meshes: Vec<f64>,
    pub errors: Vec<f64>,
    pub fit: Option<LinearFit>,
    pub reference: String,
    pub uncertified_levels: usize,
}

/// Sup error at the nodes of each partition.
pub fn converge(
    flow: &dyn AlmostFlow,
    levels: &[Partition],
    a: &Array1<f64>,
    reference: &Reference<'_>,
    region: Option<f64>,
) -> Result<ConvergenceReport> {
    if levels.len() < 2 {
        return Err(SewingError::InvalidParameter("need at least two levels".into()));
    }
    let (fine, label) = match reference {
        Reference::Finer(p) => (Some(run_scheme(flow, p, a, region)?), format!("finer:{} intervals", p.intervals())),
        Reference::Exact(_) => (None, "exact".to_string()),
    };
    let rows: Vec<(f64, bool)> = levels
        .par_iter()
        .map(|pi| -> Result<(f64, bool)> {
            let y = run_scheme(flow, pi, a, region)?;
            let err = match (reference, &fine) {
                (Reference::Exact(f), _) => pi
                    .points()
                    .iter()
                    .zip(&y.values)
                    .map(|(&t, v)| norm(&(v - &f(t))))
                    .fold(0.0, f64::max),
                (Reference::Finer(_), Some(r)) => y.sup_distance(&r.restrict(pi)?),
                _ => unreachable!(),
            };
            Ok((err, y.certified()))
        })
        .collect::<Result<_>>()?;
    let meshes: Vec<f64> = levels.iter().map(|p| p.mesh()).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(ConvergenceReport {
        fit: log_log_fit(&meshes, &errors),
        meshes,
        errors,
        reference: label,
        uncertified_levels: rows.iter().filter(|r| !r.1).count() + usize::from(fine.as_ref().is_some_and(|f: &SchemePath| !f.certified())),
    })
}
