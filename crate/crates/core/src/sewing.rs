//! Numerical schemes of almost flows, the discrete sewing functional `Phi^pi`,
//! D-solution certificates and consistency / limit / uniqueness diagnostics.

use std::io::Write;

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{Control, Remainder};
use crate::error::{Result, SewingError};
use crate::flow::{check_partition, norm, AlmostFlow, Envelope};
use crate::partition::{mu, Partition};
use crate::perturb::Perturbation;

/// Values of a discrete path on the nodes of a partition.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemePath {
    pub partition: Partition,
    pub values: Vec<Array1<f64>>,
    pub origin: Array1<f64>,
    pub flow_tag: String,
    /// nodes whose value left the working ball (or became non-finite)
    pub escapes: usize,
}

impl SchemePath {
    pub fn certified(&self) -> bool {
        self.escapes == 0
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn last(&self) -> &Array1<f64> {
        self.values.last().expect("a scheme has at least two nodes")
    }

    /// Linear interpolation between nodes.
    pub fn value_at(&self, t: f64) -> Array1<f64> {
        let pts = self.partition.points();
        if let Some(i) = self.partition.index_of(t) {
            return self.values[i].clone();
        }
        let t = t.clamp(0.0, self.partition.horizon());
        let k = (pts.partition_point(|&p| p <= t).max(1) - 1).min(pts.len() - 2);
        let w = (t - pts[k]) / (pts[k + 1] - pts[k]);
        &self.values[k] * (1.0 - w) + &self.values[k + 1] * w
    }

    /// The same path read on a coarser partition whose nodes are nodes of this one.
    pub fn restrict(&self, coarse: &Partition) -> Result<SchemePath> {
        let idx = coarse.embedding_in(&self.partition)?;
        Ok(SchemePath {
            partition: coarse.clone(),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            origin: self.origin.clone(),
            flow_tag: self.flow_tag.clone(),
            escapes: self.escapes,
        })
    }

    /// `max_k |y_k - z_k|` at the nodes of `self`, reading `other` by interpolation.
    pub fn sup_distance(&self, other: &SchemePath) -> f64 {
        self.partition
            .points()
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| norm(&(v - &other.value_at(t))))
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(norm).fold(0.0, f64::max)
    }

    /// CSV with header `t,y0,y1,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|i| format!("y{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (t, v) in self.partition.points().iter().zip(&self.values) {
            let row: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{t:e},{}", row.join(","))?;
        }
        Ok(())
    }
}

fn escaped(v: &Array1<f64>, region: Option<f64>) -> bool {
    !v.iter().all(|x| x.is_finite()) || region.is_some_and(|r| norm(v) > r)
}

fn check_origin(flow: &dyn AlmostFlow, a: &Array1<f64>) -> Result<()> {
    if a.len() != flow.dim() {
        return Err(SewingError::DimensionMismatch {
            expected: flow.dim(),
            got: a.len(),
        });
    }
    Ok(())
}

/// `y_0 = a`, `y_{k+1} = phi_{t_{k+1}, t_k}(y_k)`.
///
/// Leaving the working ball `|y| <= region` does not stop the run; it is counted in `escapes`.
pub fn run_scheme(flow: &dyn AlmostFlow, pi: &Partition, a: &Array1<f64>, region: Option<f64>) -> Result<SchemePath> {
    check_partition(flow, pi)?;
    check_origin(flow, a)?;
    let mut values = Vec::with_capacity(pi.len());
    values.push(a.clone());
    let mut escapes = usize::from(escaped(a, region));
    for w in pi.points().windows(2) {
        let next = flow.apply(w[0], w[1], values.last().unwrap());
        escapes += usize::from(escaped(&next, region));
        values.push(next);
    }
    Ok(SchemePath {
        partition: pi.clone(),
        values,
        origin: a.clone(),
        flow_tag: flow.tag(),
        escapes,
    })
}

/// `z_0 = a`, `z_{k+1} = phi_{t_{k+1}, t_k}(z_k) + eps_{t_{k+1}, t_k}(z_k)`.
pub fn perturbed_scheme(
    flow: &dyn AlmostFlow,
    eps: &dyn Perturbation,
    pi: &Partition,
    a: &Array1<f64>,
    region: Option<f64>,
) -> Result<SchemePath> {
    check_partition(flow, pi)?;
    check_origin(flow, a)?;
    let mut values = Vec::with_capacity(pi.len());
    values.push(a.clone());
    let mut escapes = usize::from(escaped(a, region));
    for w in pi.points().windows(2) {
        let z = values.last().unwrap();
        let image = flow.apply(w[0], w[1], z);
        let next = &image + &eps.eval(w[0], w[1], z, &image);
        escapes += usize::from(escaped(&next, region));
        values.push(next);
    }
    Ok(SchemePath {
        partition: pi.clone(),
        values,
        origin: a.clone(),
        flow_tag: format!("{}+{}", flow.tag(), eps.name()),
        escapes,
    })
}

/// The terms `hat phi_{t_{k+1}, t_k}(y_k)` of `Phi^pi` along a path given on the nodes of `pi`.
pub fn phi_terms(flow: &dyn AlmostFlow, pi: &Partition, y: &[Array1<f64>]) -> Result<Vec<Array1<f64>>> {
    if y.len() != pi.len() {
        return Err(SewingError::InvalidPartition(format!(
            "path has {} values for {} nodes",
            y.len(),
            pi.len()
        )));
    }
    check_partition(flow, pi)?;
    Ok(pi
        .points()
        .windows(2)
        .zip(y)
        .map(|(w, yk)| flow.apply(w[0], w[1], yk) - yk)
        .collect())
}

/// `Phi^pi_{i,j}(y) = sum_{k=i}^{j-1} hat phi_{t_{k+1}, t_k}(y_k)`.
pub fn phi_pi(flow: &dyn AlmostFlow, pi: &Partition, y: &[Array1<f64>], i: usize, j: usize) -> Result<Array1<f64>> {
    if i > j || j >= pi.len() {
        return Err(SewingError::IndexOrder(i, j));
    }
    let terms = phi_terms(flow, pi, y)?;
    Ok(terms[i..j]
        .iter()
        .fold(Array1::zeros(y[0].len()), |acc, t| acc + t))
}

/// `max_j |y_j - a - Phi^pi_{0,j}(y)|`, zero up to rounding for any scheme path.
pub fn fixed_point_defect(flow: &dyn AlmostFlow, y: &SchemePath) -> Result<f64> {
    let terms = phi_terms(flow, &y.partition, &y.values)?;
    let mut acc = y.origin.clone();
    let mut worst = norm(&(&y.values[0] - &acc));
    for (k, t) in terms.iter().enumerate() {
        acc = acc + t;
        worst = worst.max(norm(&(&y.values[k + 1] - &acc)));
    }
    Ok(worst)
}

/// `L = 2 (delta_T + M) / (1 - kappa - 2 delta_T)`; infinite when the horizon condition fails.
pub fn d_solution_constant(delta_t: f64, m: f64, kappa: f64) -> f64 {
    let room = 1.0 - kappa - 2.0 * delta_t;
    if room <= 0.0 {
        f64::INFINITY
    } else {
        2.0 * (delta_t + m) / room
    }
}

/// `A = 2 (delta_T (1 + K) + M) / (1 - kappa)`.
pub fn consistency_constant(delta_t: f64, k: f64, m: f64, kappa: f64) -> f64 {
    2.0 * (delta_t * (1.0 + k) + m) / (1.0 - kappa)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DSolutionReport {
    /// `sup_{i<j} |y_j - phi_{j,i}(y_i)| / varpi(omega_{i,j})`
    pub k_hat: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub l_bound: f64,
    pub delta_t: f64,
    pub m: f64,
    pub kappa: f64,
    /// `kappa < 1` and `kappa + 2 delta_T < 1`
    pub hypotheses_ok: bool,
    pub pass: bool,
    pub pairs: usize,
    /// pairs with `varpi(omega) = 0` and a nonzero gap
    pub zero_remainder_pairs: usize,
}

/// Exact `K_hat` over all `O(n^2)` node pairs.
pub fn certify_d_solution(
    flow: &dyn AlmostFlow,
    y: &SchemePath,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    envelope: &Envelope,
    kappa: f64,
) -> Result<DSolutionReport> {
    check_partition(flow, &y.partition)?;
    let pts = y.partition.points();
    let n = pts.len();
    let rows: Vec<(f64, Option<(usize, usize)>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0f64, None, 0usize);
            for j in i + 1..n {
                let gap = norm(&(&y.values[j] - &flow.apply(pts[i], pts[j], &y.values[i])));
                let w = varpi.eval(omega.eval(pts[i], pts[j]));
                if w == 0.0 {
                    best.2 += usize::from(gap > 0.0);
                    continue;
                }
                let q = gap / w;
                if q > best.0 {
                    best.0 = q;
                    best.1 = Some((i, j));
                }
            }
            best
        })
        .collect();
    let mut k_hat = 0.0f64;
    let mut worst_pair = None;
    for r in &rows {
        if r.0 > k_hat {
            k_hat = r.0;
            worst_pair = r.1;
        }
    }
    let delta_t = envelope.delta.eval(flow.horizon());
    let hypotheses_ok = kappa < 1.0 && kappa + 2.0 * delta_t < 1.0;
    let l_bound = d_solution_constant(delta_t, envelope.m, kappa);
    let zero_remainder_pairs = rows.iter().map(|r| r.2).sum();
    Ok(DSolutionReport {
        k_hat,
        worst_pair,
        l_bound,
        delta_t,
        m: envelope.m,
        kappa,
        hypotheses_ok,
        pass: hypotheses_ok && zero_remainder_pairs == 0 && k_hat <= l_bound,
        pairs: n * (n - 1) / 2,
        zero_remainder_pairs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub a_bound: f64,
    pub k: f64,
    /// `max |Phi^sigma_{s,t}(y) - Phi^pi_{s,t}(y)|` over node pairs of `pi`
    pub gap: f64,
    /// `max gap / (A mu_{s,t}(pi) omega_{s,t})`
    pub worst_ratio: f64,
    /// pairs where the gap exceeds the budget
    pub violations: usize,
    pub pairs: usize,
    pub mesh: f64,
}

/// Compare `Phi^sigma` and `Phi^pi` along a path `y` given on the finer partition `sigma`,
/// on every node pair of `pi`. `k` is the D-solution constant of `y`.
#[allow(clippy::too_many_arguments)]
pub fn consistency_gap(
    flow: &dyn AlmostFlow,
    y: &SchemePath,
    pi: &Partition,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    envelope: &Envelope,
    kappa: f64,
    k: f64,
) -> Result<ConsistencyReport> {
    if !pi.is_nested_in(&y.partition) {
        return Err(SewingError::NotNested(
            "the coarse partition must be contained in the path's partition".into(),
        ));
    }
    let sigma = &y.partition;
    let fine_terms = phi_terms(flow, sigma, &y.values)?;
    let coarse = y.restrict(pi)?;
    let coarse_terms = phi_terms(flow, pi, &coarse.values)?;
    let prefix = |terms: &[Array1<f64>]| {
        let mut out = vec![Array1::zeros(y.dim())];
        for t in terms {
            let next = out.last().unwrap() + t;
            out.push(next);
        }
        out
    };
    let fine_prefix = prefix(&fine_terms);
    let coarse_prefix = prefix(&coarse_terms);
    let idx = pi.embedding_in(sigma)?;
    let delta_t = envelope.delta.eval(flow.horizon());
    let a_bound = consistency_constant(delta_t, k, envelope.m, kappa);
    let pts = pi.points();
    let n = pts.len();
    let rows: Vec<(f64, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = (0.0f64, 0.0f64, 0usize);
            for j in i + 1..n {
                let fine = &fine_prefix[idx[j]] - &fine_prefix[idx[i]];
                let coarse = &coarse_prefix[j] - &coarse_prefix[i];
                let gap = norm(&(fine - coarse));
                let budget = a_bound * mu(pi, omega, varpi, pts[i], pts[j]) * omega.eval(pts[i], pts[j]);
                out.0 = out.0.max(gap);
                if budget > 0.0 {
                    out.1 = out.1.max(gap / budget);
                }
                // rounding slack relative to the path size
                if gap > budget + 1e-12 * (1.0 + y.sup_norm()) {
                    out.2 += 1;
                }
            }
            out
        })
        .collect();
    Ok(ConsistencyReport {
        a_bound,
        k,
        gap: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        worst_ratio: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        violations: rows.iter().map(|r| r.2).sum(),
        pairs: n * (n - 1) / 2,
        mesh: pi.mesh(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SewingLimit {
    pub value: Vec<f64>,
    /// last dyadic gap, used as the error estimate
    pub error: f64,
    pub gaps: Vec<f64>,
    pub depth: u32,
    pub diverging: bool,
}

/// `Phi^{pi_k}_{s,t}(y)` along dyadic partitions of `[s, t]`, `k = 0..=depth`, with `y`
/// read by linear interpolation. Every dyadic point must be an evaluation time of the flow.
pub fn sewing_limit(flow: &dyn AlmostFlow, y: &SchemePath, s: f64, t: f64, depth: u32) -> Result<SewingLimit> {
    if !(s < t) || s < 0.0 || t > flow.horizon() + crate::partition::TIME_TOL {
        return Err(SewingError::InvalidParameter(format!("bad interval [{s}, {t}]")));
    }
    let mut values: Vec<Array1<f64>> = Vec::new();
    let mut gaps = Vec::new();
    for k in 0..=depth {
        let n = 1usize << k;
        let times: Vec<f64> = (0..=n).map(|j| s + (t - s) * j as f64 / n as f64).collect();
        if let Some(nodes) = flow.nodes() {
            if let Some(&bad) = times.iter().find(|&&u| nodes.index_of(u).is_none()) {
                return Err(SewingError::OffGrid(bad));
            }
        }
        let mut acc = Array1::zeros(y.dim());
        for w in times.windows(2) {
            let yk = y.value_at(w[0]);
            acc = acc + flow.apply(w[0], w[1], &yk) - &yk;
        }
        if let Some(prev) = values.last() {
            gaps.push(norm(&(&acc - prev)));
        }
        values.push(acc);
    }
    let diverging = gaps.len() >= 2 && {
        let (a, b) = (gaps[gaps.len() - 2], gaps[gaps.len() - 1]);
        b >= a && b > 1e-14
    };
    Ok(SewingLimit {
        value: values.last().unwrap().to_vec(),
        error: gaps.last().copied().unwrap_or(0.0),
        gaps,
        depth,
        diverging,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// `max_j |y_{t_j} - psi_{t_j, 0}(a)|`
    pub residual: f64,
    pub worst_node: usize,
    /// telescoping bound `sum_k |v_{k+1} - v_k|` at the worst node, `v_k = psi_{t, t_k}(y_k)`
    pub telescoping_bound: f64,
    /// `sum_k |y_{k+1} - psi_{k+1,k}(y_k)|`
    pub local_sum: f64,
    /// `sum_k |hat psi_{t,t_{k+1}}(y_{k+1}) - hat psi_{t,t_{k+1}}(psi_{k+1,k}(y_k))|` at the worst node
    pub osc_sum: f64,
}

/// Distance between a path and the orbit of a flow `psi`, with the telescoping bound.
pub fn uniqueness_residual(psi: &dyn AlmostFlow, y: &SchemePath) -> Result<UniquenessReport> {
    check_partition(psi, &y.partition)?;
    let pts = y.partition.points();
    let n = pts.len();
    let local: Vec<Array1<f64>> = (0..n - 1).map(|k| psi.apply(pts[k], pts[k + 1], &y.values[k])).collect();
    let local_sum = (0..n - 1).map(|k| norm(&(&y.values[k + 1] - &local[k]))).sum();
    let per_node: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let t = pts[j];
            let residual = norm(&(&y.values[j] - &psi.apply(0.0, t, &y.origin)));
            let mut bound = 0.0;
            let mut osc = 0.0;
            let mut v_prev = psi.apply(0.0, t, &y.values[0]);
            for k in 0..j {
                let v_next = psi.apply(pts[k + 1], t, &y.values[k + 1]);
                bound += norm(&(&v_next - &v_prev));
                let through = psi.apply(pts[k + 1], t, &local[k]);
                let hat_diff = (&v_next - &y.values[k + 1]) - (&through - &local[k]);
                osc += norm(&hat_diff);
                v_prev = v_next;
            }
            (residual, bound, osc)
        })
        .collect();
    let mut worst_node = 0;
    for (j, r) in per_node.iter().enumerate() {
        if r.0 > per_node[worst_node].0 {
            worst_node = j;
        }
    }
    Ok(UniquenessReport {
        residual: per_node[worst_node].0,
        worst_node,
        telescoping_bound: per_node[worst_node].1,
        local_sum,
        osc_sum: per_node[worst_node].2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{DeltaFunction, LinearControl, PowerRemainder};
    use crate::field::{AffineField, ConstantField, SinField};
    use crate::flow::{DavieFlow, EulerYoungFlow, FnFlow};
    use crate::perturb::ZeroPerturbation;
    use crate::rough_path::{lift_function, GridRoughPath};
    use ndarray::array;
    use std::sync::Arc;

    fn line(n: usize) -> Arc<GridRoughPath> {
        let grid = Partition::uniform(n, 1.0).unwrap();
        Arc::new(lift_function(|t| array![t], &grid, 1, 2.0).unwrap())
    }

    #[test]
    fn zero_and_constant_fields() {
        let x = line(16);
        let omega = Arc::new(LinearControl::unit(1.0));
        let pi = Partition::uniform(16, 1.0).unwrap();
        let zero = DavieFlow::new(Arc::new(ConstantField { value: array![[0.0]] }), x.clone(), omega.clone(), 1.0).unwrap();
        let y = run_scheme(&zero, &pi, &array![0.4], Some(1.0)).unwrap();
        assert!(y.values.iter().all(|v| v[0] == 0.4));
        let c = DavieFlow::new(Arc::new(ConstantField { value: array![[1.5]] }), x, omega, 10.0).unwrap();
        let y = run_scheme(&c, &pi, &array![0.4], Some(10.0)).unwrap();
        for (t, v) in pi.points().iter().zip(&y.values) {
            assert!((v[0] - (0.4 + 1.5 * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn compound_euler_reaches_e() {
        let n = 1024;
        let flow = EulerYoungFlow::new(Arc::new(AffineField::scalar(1.0)), line(n), 1.0, 4.0).unwrap();
        let y = run_scheme(&flow, &Partition::uniform(n, 1.0).unwrap(), &array![1.0], Some(4.0)).unwrap();
        let e = std::f64::consts::E;
        assert!((y.last()[0] - (1.0 + 1.0 / n as f64).powi(n as i32)).abs() < 1e-12);
        assert!((y.last()[0] - e).abs() <= 2.0 * e / n as f64);
    }

    #[test]
    fn phi_pi_identities() {
        let flow = DavieFlow::new(Arc::new(SinField), line(32), Arc::new(LinearControl::unit(1.0)), 3.0).unwrap();
        let pi = Partition::uniform(32, 1.0).unwrap();
        let y = run_scheme(&flow, &pi, &array![0.3], None).unwrap();
        assert!(fixed_point_defect(&flow, &y).unwrap() <= 1e-12);
        assert_eq!(phi_pi(&flow, &pi, &y.values, 5, 5).unwrap()[0], 0.0);
        let ij = phi_pi(&flow, &pi, &y.values, 3, 11).unwrap();
        let jk = phi_pi(&flow, &pi, &y.values, 11, 30).unwrap();
        let ik = phi_pi(&flow, &pi, &y.values, 3, 30).unwrap();
        assert!((&ij + &jk - &ik)[0].abs() <= 1e-12);
        assert!(matches!(phi_pi(&flow, &pi, &y.values, 4, 2), Err(SewingError::IndexOrder(4, 2))));
    }

    #[test]
    fn l_constant_arithmetic() {
        assert_eq!(d_solution_constant(0.1, 1.0, 0.5), 2.0 * 1.1 / (1.0 - 0.5 - 0.2));
        assert!((d_solution_constant(0.1, 1.0, 0.5) - 22.0 / 3.0).abs() < 1e-15);
        assert!(d_solution_constant(0.1, 1.0, 0.9).is_infinite());
    }

    #[test]
    fn constant_field_certifies_with_zero_k() {
        let x = line(16);
        let omega = LinearControl::unit(1.0);
        let flow = DavieFlow::new(Arc::new(ConstantField { value: array![[0.05]] }), x, Arc::new(omega), 2.0).unwrap();
        let y = run_scheme(&flow, &Partition::uniform(16, 1.0).unwrap(), &array![0.0], Some(2.0)).unwrap();
        let env = flow.envelope();
        let rep = certify_d_solution(&flow, &y, &omega, &PowerRemainder::new(2.0), &env, 0.5).unwrap();
        assert!(rep.k_hat < 1e-12 && rep.pass, "{rep:?}");
        assert_eq!(rep.pairs, 16 * 17 / 2);
    }

    #[test]
    fn consistency_trivial_cases() {
        let omega = LinearControl::unit(1.0);
        let varpi = PowerRemainder::new(1.2);
        let flow = DavieFlow::new(Arc::new(SinField), line(64), Arc::new(omega), 3.0).unwrap();
        let sigma = Partition::uniform(64, 1.0).unwrap();
        let y = run_scheme(&flow, &sigma, &array![0.5], None).unwrap();
        let env = flow.envelope();
        let same = consistency_gap(&flow, &y, &sigma, &omega, &varpi, &env, varpi.kappa(), 1.0).unwrap();
        assert!(same.gap < 1e-14);
        let pi = Partition::uniform(8, 1.0).unwrap();
        assert!(consistency_gap(&flow, &y, &pi, &omega, &varpi, &env, varpi.kappa(), 1.0).unwrap().gap > 0.0);
        let other = Partition::uniform(3, 1.0).unwrap();
        assert!(matches!(
            consistency_gap(&flow, &y, &other, &omega, &varpi, &env, varpi.kappa(), 1.0),
            Err(SewingError::NotNested(_))
        ));
    }

    #[test]
    fn sewing_limit_cases() {
        let x = line(256);
        let omega = Arc::new(LinearControl::unit(1.0));
        let pi = Partition::uniform(256, 1.0).unwrap();
        let c = DavieFlow::new(Arc::new(ConstantField { value: array![[2.0]] }), x.clone(), omega.clone(), 5.0).unwrap();
        let y = run_scheme(&c, &pi, &array![0.0], None).unwrap();
        let lim = sewing_limit(&c, &y, 0.25, 0.75, 0).unwrap();
        assert!((lim.value[0] - 1.0).abs() < 1e-14);
        let lin = DavieFlow::new(Arc::new(AffineField::scalar(1.0)), x, omega, 5.0).unwrap();
        let y = run_scheme(&lin, &pi, &array![1.0], None).unwrap();
        let lim = sewing_limit(&lin, &y, 0.25, 0.75, 7).unwrap();
        // trapezoid rule of the interpolated path is its exact integral
        let idx: Vec<usize> = (64..=192).collect();
        let oracle: f64 = idx.windows(2).map(|w| (y.values[w[0]][0] + y.values[w[1]][0]) / 2.0 / 256.0).sum();
        assert!(!lim.diverging);
        assert!((lim.value[0] - oracle).abs() <= 2.0 * lim.error, "{} {} {}", lim.value[0], oracle, lim.error);
        assert!(matches!(sewing_limit(&lin, &y, 0.25, 0.75, 9), Err(SewingError::OffGrid(_))));
    }

    #[test]
    fn perturbed_with_zero_equals_plain() {
        let flow = DavieFlow::new(Arc::new(SinField), line(16), Arc::new(LinearControl::unit(1.0)), 3.0).unwrap();
        let pi = Partition::uniform(16, 1.0).unwrap();
        let y = run_scheme(&flow, &pi, &array![0.2], None).unwrap();
        let z = perturbed_scheme(&flow, &ZeroPerturbation, &pi, &array![0.2], None).unwrap();
        assert_eq!(y.values, z.values);
    }

    #[test]
    fn uniqueness_against_exact_flow() {
        let psi = FnFlow::linear_ode(1.0, 1, 1.0, 4.0);
        let mut last = f64::INFINITY;
        for n in [16usize, 64, 256] {
            let flow = EulerYoungFlow::new(Arc::new(AffineField::scalar(1.0)), line(n), 1.0, 4.0).unwrap();
            let y = run_scheme(&flow, &Partition::uniform(n, 1.0).unwrap(), &array![1.0], None).unwrap();
            let rep = uniqueness_residual(&psi, &y).unwrap();
            assert!(rep.residual <= rep.telescoping_bound + 1e-12);
            assert!(rep.residual < last);
            last = rep.residual;
        }
        // the scheme of the exact flow is its own orbit
        let own = run_scheme(&psi, &Partition::uniform(16, 1.0).unwrap(), &array![1.0], None).unwrap();
        assert!(uniqueness_residual(&psi, &own).unwrap().residual < 1e-14);
        let zero = FnFlow::new("id", 1, 1.0, Envelope::new(DeltaFunction::zero(), 0.0), |_, _, a| a.clone());
        let still = run_scheme(&zero, &Partition::uniform(8, 1.0).unwrap(), &array![3.0], None).unwrap();
        assert_eq!(uniqueness_residual(&zero, &still).unwrap().residual, 0.0);
    }

    #[test]
    fn escape_is_counted_not_fatal() {
        let flow = EulerYoungFlow::new(Arc::new(AffineField::scalar(1.0)), line(16), 1.0, 1.0).unwrap();
        let y = run_scheme(&flow, &Partition::uniform(16, 1.0).unwrap(), &array![0.9], Some(1.0)).unwrap();
        assert!(y.escapes > 0 && !y.certified());
        assert_eq!(y.values.len(), 17);
    }

    #[test]
    fn csv_layout() {
        let flow = FnFlow::linear_ode(1.0, 2, 1.0, 4.0);
        let y = run_scheme(&flow, &Partition::uniform(2, 1.0).unwrap(), &array![1.0, 0.0], None).unwrap();
        let mut out = Vec::new();
        y.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,y0,y1\n"));
    }
}
