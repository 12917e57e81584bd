//! Level-2 rough paths stored on a grid.
//!
//! Only the increments over consecutive grid points are stored. Increments over
//! any other pair of nodes come from Chen's relation
//! `x1_{r,t} = x1_{r,s} + x1_{s,t}`, `x2_{r,t} = x2_{r,s} + x2_{s,t} + x1_{r,s} (x) x1_{s,t}`,
//! evaluated through a prefix signature `X_{0,t_i}` built once at construction.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::control::Control;
use crate::error::{Result, SewingError};
use crate::partition::Partition;
use crate::rng::CounterRng;

/// `(x1, x2)` with `x1` in `U = R^d` and `x2` in `U (x) U`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughIncrement {
    pub x1: Array1<f64>,
    pub x2: Array2<f64>,
}

impl RoughIncrement {
    pub fn zero(d: usize) -> Self {
        Self {
            x1: Array1::zeros(d),
            x2: Array2::zeros((d, d)),
        }
    }

    pub fn new(x1: Array1<f64>, x2: Array2<f64>) -> Result<Self> {
        let d = x1.len();
        if x2.dim() != (d, d) {
            return Err(SewingError::DimensionMismatch {
                expected: d,
                got: x2.nrows(),
            });
        }
        Ok(Self { x1, x2 })
    }

    pub fn dim(&self) -> usize {
        self.x1.len()
    }

    pub fn x1_norm(&self) -> f64 {
        self.x1.dot(&self.x1).sqrt()
    }

    /// Hilbert-Schmidt norm of the second level.
    pub fn x2_norm(&self) -> f64 {
        self.x2.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Ito bracket `x1 (x) x1 - x2 - x2^T`, additive in time for any level-2 path.
    pub fn bracket(&self) -> Array2<f64> {
        let outer = outer(&self.x1, &self.x1);
        &outer - &self.x2 - &self.x2.t()
    }

    pub fn is_finite(&self) -> bool {
        self.x1.iter().chain(self.x2.iter()).all(|v| v.is_finite())
    }

    /// Scale the underlying path by `lambda`: levels scale by `lambda` and `lambda^2`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            x1: &self.x1 * lambda,
            x2: &self.x2 * (lambda * lambda),
        }
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Chen product `a` then `b`: `(x1_a + x1_b, x2_a + x2_b + x1_a (x) x1_b)`.
pub fn chen_combine(a: &RoughIncrement, b: &RoughIncrement) -> Result<RoughIncrement> {
    if a.dim() != b.dim() {
        return Err(SewingError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(RoughIncrement {
        x1: &a.x1 + &b.x1,
        x2: &a.x2 + &b.x2 + outer(&a.x1, &b.x1),
    })
}

/// A level-2 rough path on a base grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRoughPath {
    grid: Partition,
    increments: Vec<RoughIncrement>,
    d: usize,
    p: f64,
    prefix1: Vec<f64>,
    prefix2: Vec<f64>,
}

impl GridRoughPath {
    pub fn from_increments(grid: Partition, increments: Vec<RoughIncrement>, p: f64) -> Result<Self> {
        if increments.len() != grid.intervals() {
            return Err(SewingError::InvalidGrid(format!(
                "{} increments for {} intervals",
                increments.len(),
                grid.intervals()
            )));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(SewingError::InvalidParameter(format!("p = {p} must be >= 1")));
        }
        let d = increments.first().map_or(0, RoughIncrement::dim);
        if d == 0 {
            return Err(SewingError::InvalidParameter("zero driver dimension".into()));
        }
        let n = grid.len();
        let mut prefix1 = vec![0.0; n * d];
        let mut prefix2 = vec![0.0; n * d * d];
        for (k, inc) in increments.iter().enumerate() {
            if inc.dim() != d {
                return Err(SewingError::DimensionMismatch {
                    expected: d,
                    got: inc.dim(),
                });
            }
            if !inc.is_finite() {
                return Err(SewingError::InvalidParameter(format!(
                    "non-finite increment on interval {k}"
                )));
            }
            for a in 0..d {
                prefix1[(k + 1) * d + a] = prefix1[k * d + a] + inc.x1[a];
                for b in 0..d {
                    prefix2[(k + 1) * d * d + a * d + b] = prefix2[k * d * d + a * d + b]
                        + inc.x2[[a, b]]
                        + prefix1[k * d + a] * inc.x1[b];
                }
            }
        }
        Ok(Self {
            grid,
            increments,
            d,
            p,
            prefix1,
            prefix2,
        })
    }

    pub fn grid(&self) -> &Partition {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn increments(&self) -> &[RoughIncrement] {
        &self.increments
    }

    /// First-level increment between nodes `i <= j`, written into `out`.
    pub fn x1_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let d = self.d;
        for a in 0..d {
            out[a] = self.prefix1[j * d + a] - self.prefix1[i * d + a];
        }
    }

    /// Both levels between nodes `i <= j`, written into flat buffers (`x2` row-major).
    pub fn increment_into(&self, i: usize, j: usize, x1: &mut [f64], x2: &mut [f64]) {
        let d = self.d;
        self.x1_into(i, j, x1);
        for a in 0..d {
            for b in 0..d {
                x2[a * d + b] = self.prefix2[j * d * d + a * d + b]
                    - self.prefix2[i * d * d + a * d + b]
                    - self.prefix1[i * d + a] * x1[b];
            }
        }
    }

    /// Increment between grid nodes `i <= j`.
    pub fn increment_by_index(&self, i: usize, j: usize) -> RoughIncrement {
        assert!(i <= j && j < self.grid.len(), "bad node pair ({i}, {j})");
        let d = self.d;
        let mut x1 = vec![0.0; d];
        let mut x2 = vec![0.0; d * d];
        self.increment_into(i, j, &mut x1, &mut x2);
        RoughIncrement {
            x1: Array1::from(x1),
            x2: Array2::from_shape_vec((d, d), x2).expect("shape"),
        }
    }

    /// Increment between two node times.
    pub fn increment(&self, s: f64, t: f64) -> Result<RoughIncrement> {
        let i = self.grid.index_of(s).ok_or(SewingError::OffGrid(s))?;
        let j = self.grid.index_of(t).ok_or(SewingError::OffGrid(t))?;
        if i > j {
            return Err(SewingError::IndexOrder(i, j));
        }
        Ok(self.increment_by_index(i, j))
    }

    /// The same increment by left-to-right Chen folding of the stored pieces.
    pub fn compose_range(&self, i: usize, j: usize) -> RoughIncrement {
        self.increments[i..j]
            .iter()
            .fold(RoughIncrement::zero(self.d), |acc, inc| {
                chen_combine(&acc, inc).expect("uniform dimension")
            })
    }

    /// Restrict to a coarser partition whose nodes are nodes of this grid.
    pub fn coarsen(&self, coarse: &Partition) -> Result<GridRoughPath> {
        let idx = coarse.embedding_in(&self.grid)?;
        let increments = idx
            .windows(2)
            .map(|w| self.compose_range(w[0], w[1]))
            .collect();
        GridRoughPath::from_increments(coarse.clone(), increments, self.p)
    }

    /// Apply a path dilation `x -> lambda x` to every increment.
    pub fn dilate(&self, lambda: f64) -> Result<GridRoughPath> {
        GridRoughPath::from_increments(
            self.grid.clone(),
            self.increments.iter().map(|i| i.dilate(lambda)).collect(),
            self.p,
        )
    }

    /// Worst Chen defect over all node triples `r <= s <= t` (by independent folding).
    pub fn chen_defect(&self) -> f64 {
        let n = self.grid.len();
        (0..n)
            .into_par_iter()
            .map(|r| {
                let mut worst = 0.0f64;
                for s in r..n {
                    let rs = self.increment_by_index(r, s);
                    for t in s..n {
                        let st = self.increment_by_index(s, t);
                        let rt = self.increment_by_index(r, t);
                        let composed = chen_combine(&rs, &st).expect("dimension");
                        let e1 = (&composed.x1 - &rt.x1).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        let e2 = (&composed.x2 - &rt.x2).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        worst = worst.max(e1).max(e2);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Additive control `omega_{s,t} = sum over grid intervals in [s,t] of |x1|^p + |x2|^(p/2)`,
    /// linearly interpolated inside an interval.
    pub fn pvar_control(&self) -> GridControl {
        let mut cumulative = Vec::with_capacity(self.grid.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for inc in &self.increments {
            acc += inc.x1_norm().powf(self.p) + inc.x2_norm().powf(self.p / 2.0);
            cumulative.push(acc);
        }
        GridControl {
            grid: self.grid.clone(),
            cumulative,
        }
    }

    /// Serialize as little-endian 64-bit words:
    /// `d (u64) | p (f64) | n_points (u64) | grid (f64 x n_points)`
    /// followed, per interval, by `x1` (`d` floats) and `x2` (`d*d` floats, row-major).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&self.p.to_le_bytes())?;
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        for t in self.grid.points() {
            w.write_all(&t.to_le_bytes())?;
        }
        for inc in &self.increments {
            for v in inc.x1.iter().chain(inc.x2.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut buf)?;
            Ok(buf)
        };
        let d = u64::from_le_bytes(next(&mut r)?) as usize;
        let p = f64::from_le_bytes(next(&mut r)?);
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        if d == 0 || d > 1 << 10 || n < 2 || n > 1 << 28 {
            return Err(SewingError::Io(format!("implausible header d={d} n={n}")));
        }
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            pts.push(f64::from_le_bytes(next(&mut r)?));
        }
        let grid = Partition::new(pts)?;
        let mut increments = Vec::with_capacity(n - 1);
        for _ in 0..n - 1 {
            let mut x1 = Vec::with_capacity(d);
            for _ in 0..d {
                x1.push(f64::from_le_bytes(next(&mut r)?));
            }
            let mut x2 = Vec::with_capacity(d * d);
            for _ in 0..d * d {
                x2.push(f64::from_le_bytes(next(&mut r)?));
            }
            increments.push(RoughIncrement {
                x1: Array1::from(x1),
                x2: Array2::from_shape_vec((d, d), x2).expect("shape"),
            });
        }
        GridRoughPath::from_increments(grid, increments, p)
    }
}

/// Additive (hence super-additive) control built from grid increments.
#[derive(Clone, Debug)]
pub struct GridControl {
    grid: Partition,
    cumulative: Vec<f64>,
}

impl GridControl {
    fn at(&self, t: f64) -> f64 {
        let pts = self.grid.points();
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.grid.horizon() {
            return *self.cumulative.last().unwrap();
        }
        if let Some(i) = self.grid.index_of(t) {
            return self.cumulative[i];
        }
        let k = pts.partition_point(|&p| p <= t) - 1;
        let w = (t - pts[k]) / (pts[k + 1] - pts[k]);
        self.cumulative[k] + w * (self.cumulative[k + 1] - self.cumulative[k])
    }
}

impl Control for GridControl {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (self.at(t) - self.at(s)).max(0.0)
    }

    fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    fn name(&self) -> String {
        "pvar-grid".into()
    }

    /// Exact: the window sum is piecewise linear in its start, so the sup is
    /// attained when either window end sits on a grid node.
    fn modulus(&self, h: f64) -> f64 {
        let t = self.grid.horizon();
        if h <= 0.0 {
            return 0.0;
        }
        if h >= t {
            return *self.cumulative.last().unwrap();
        }
        self.grid
            .points()
            .iter()
            .flat_map(|&p| [p, p - h])
            .filter(|&s| s >= 0.0 && s + h <= t)
            .map(|s| self.eval(s, s + h))
            .fold(0.0, f64::max)
    }
}

/// Lift a path sampled on `times` (which must contain every node of `target`)
/// with the exact iterated integrals of the piecewise-linear interpolation.
pub fn lift_smooth(times: &[f64], values: &[Array1<f64>], target: &Partition, p: f64) -> Result<GridRoughPath> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(SewingError::InvalidGrid("times and values disagree".into()));
    }
    let fine = Partition::new(times.to_vec())?;
    let idx = target.embedding_in(&fine)?;
    let d = values[0].len();
    let mut increments = Vec::with_capacity(target.intervals());
    for w in idx.windows(2) {
        let start = &values[w[0]];
        let mut x2 = Array2::<f64>::zeros((d, d));
        for k in w[0]..w[1] {
            // exact iterated integral of the linear segment
            let dx = &values[k + 1] - &values[k];
            let rel = &values[k] - start + &dx * 0.5;
            x2 += &outer(&rel, &dx);
        }
        increments.push(RoughIncrement {
            x1: &values[w[1]] - start,
            x2,
        });
    }
    GridRoughPath::from_increments(target.clone(), increments, p)
}

/// Lift `path(t)` sampled on `target` refined `sub` times per interval.
pub fn lift_function(
    path: impl Fn(f64) -> Array1<f64>,
    target: &Partition,
    sub: usize,
    p: f64,
) -> Result<GridRoughPath> {
    if sub == 0 {
        return Err(SewingError::InvalidParameter("sub-steps must be >= 1".into()));
    }
    let mut times = Vec::with_capacity(target.intervals() * sub + 1);
    for w in target.points().windows(2) {
        for k in 0..sub {
            times.push(w[0] + (w[1] - w[0]) * k as f64 / sub as f64);
        }
    }
    times.push(target.horizon());
    let values: Vec<Array1<f64>> = times.iter().map(|&t| path(t)).collect();
    lift_smooth(&times, &values, target, p)
}

/// Enhanced (Ito) Brownian motion on `base`, with `sub` Ito sub-steps per interval.
///
/// For every interval and component the endpoint increment is drawn first and the
/// sub-grid is filled by a Brownian bridge, so `x1` does not depend on `sub`.
/// The diagonal of `x2` is exact; `sub` only resolves the off-diagonal areas.
/// Draws are keyed by `(seed, interval, component)`.
pub fn sample_ito_ebm(d: usize, base: &Partition, sub: usize, seed: u64, p: f64) -> Result<GridRoughPath> {
    if sub == 0 || d == 0 {
        return Err(SewingError::InvalidParameter(format!(
            "need d >= 1 and sub >= 1 (d={d}, sub={sub})"
        )));
    }
    let root = CounterRng::new(seed);
    // a scalar driver has no area to resolve
    let sub = if d == 1 { 1 } else { sub };
    let increments: Vec<RoughIncrement> = base
        .points()
        .par_windows(2)
        .enumerate()
        .map(|(i, w)| {
            let h = w[1] - w[0];
            // paths[c][k] = B^c at sub-node k relative to the interval start
            let mut paths = vec![vec![0.0; sub + 1]; d];
            for (c, path) in paths.iter_mut().enumerate() {
                let mut draws = root.substream((i as u64) * (d as u64) + c as u64).cursor();
                let end = h.sqrt() * draws.normal();
                path[sub] = end;
                let dt = h / sub as f64;
                for k in 0..sub.saturating_sub(1) {
                    let remaining = (sub - k) as f64;
                    let mean = path[k] + (end - path[k]) / remaining;
                    let var = dt * (remaining - 1.0) / remaining;
                    path[k + 1] = mean + var.sqrt() * draws.normal();
                }
            }
            let mut x2 = Array2::<f64>::zeros((d, d));
            for k in 0..sub {
                for a in 0..d {
                    let rel = paths[a][k];
                    if rel == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        x2[[a, b]] += rel * (paths[b][k + 1] - paths[b][k]);
                    }
                }
            }
            // the diagonal is a function of the increment: int B dB = (B^2 - h) / 2
            for (c, path) in paths.iter().enumerate() {
                x2[[c, c]] = 0.5 * (path[sub] * path[sub] - h);
            }
            RoughIncrement {
                x1: Array1::from_iter(paths.iter().map(|p| p[sub])),
                x2,
            }
        })
        .collect();
    GridRoughPath::from_increments(base.clone(), increments, p)
}

/// Sampled p-variation norm of a grid rough path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PVarReport {
    pub norm: f64,
    pub pairs_checked: usize,
    pub infinite: bool,
    pub argmax: Option<(usize, usize)>,
}

/// `sup |x1_{s,t}| / omega^{1/p} + |x2_{s,t}| / omega^{2/p}` over all node pairs.
pub fn pvar_norm(x: &GridRoughPath, omega: &dyn Control) -> PVarReport {
    let pts = x.grid().points();
    let n = pts.len();
    let p = x.p();
    let d = x.dim();
    let per_row: Vec<(f64, Option<(usize, usize)>, bool, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut x1 = vec![0.0; d];
            let mut x2 = vec![0.0; d * d];
            let mut best = 0.0f64;
            let mut arg = None;
            let mut inf = false;
            for j in i + 1..n {
                x.increment_into(i, j, &mut x1, &mut x2);
                let n1 = x1.iter().map(|v| v * v).sum::<f64>().sqrt();
                let n2 = x2.iter().map(|v| v * v).sum::<f64>().sqrt();
                let o = omega.eval(pts[i], pts[j]);
                let q = if o > 0.0 {
                    n1 / o.powf(1.0 / p) + n2 / o.powf(2.0 / p)
                } else if n1 == 0.0 && n2 == 0.0 {
                    0.0
                } else {
                    inf = true;
                    f64::INFINITY
                };
                if q > best {
                    best = q;
                    arg = Some((i, j));
                }
            }
            (best, arg, inf, n - i - 1)
        })
        .collect();
    let mut report = PVarReport {
        norm: 0.0,
        pairs_checked: 0,
        infinite: false,
        argmax: None,
    };
    for (best, arg, inf, count) in per_row {
        report.pairs_checked += count;
        report.infinite |= inf;
        if best > report.norm {
            report.norm = best;
            report.argmax = arg;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::LinearControl;
    use ndarray::array;

    #[test]
    fn chen_identity_and_basis() {
        let v = RoughIncrement::new(array![1.0, -2.0], Array2::zeros((2, 2))).unwrap();
        let z = RoughIncrement::zero(2);
        assert_eq!(chen_combine(&v, &z).unwrap(), v);
        let e1 = RoughIncrement::new(array![1.0, 0.0], Array2::zeros((2, 2))).unwrap();
        let e2 = RoughIncrement::new(array![0.0, 1.0], Array2::zeros((2, 2))).unwrap();
        let c = chen_combine(&e1, &e2).unwrap();
        assert_eq!(c.x1, array![1.0, 1.0]);
        assert_eq!(c.x2, array![[0.0, 1.0], [0.0, 0.0]]);
        assert!(chen_combine(&e1, &RoughIncrement::zero(3)).is_err());
    }

    #[test]
    fn lift_of_diagonal_line() {
        let target = Partition::uniform(1, 1.0).unwrap();
        for &sub in &[1usize, 16, 256] {
            let x = lift_function(|t| array![t, t], &target, sub, 2.0).unwrap();
            let inc = x.increment(0.0, 1.0).unwrap();
            for v in inc.x2.iter() {
                assert!((v - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lift_of_parabola_cross_term() {
        let target = Partition::uniform(1, 1.0).unwrap();
        let sub = 1024;
        let x = lift_function(|t| array![t, t * t], &target, sub, 2.0).unwrap();
        let inc = x.increment(0.0, 1.0).unwrap();
        let h = 1.0 / sub as f64;
        // x2[1][0] = int s^2 ds = 1/3, x2[0][1] = int s d(s^2) = 2/3
        assert!((inc.x2[[1, 0]] - 1.0 / 3.0).abs() <= h * h);
        assert!((inc.x2[[0, 1]] - 2.0 / 3.0).abs() <= h * h);
        // geometric: the symmetric part is x1 x1^T / 2
        assert!(inc.bracket().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_path_has_zero_lift() {
        let target = Partition::uniform(4, 1.0).unwrap();
        let x = lift_function(|_| array![3.0], &target, 8, 2.0).unwrap();
        assert!(x.increments().iter().all(|i| i.x1_norm() == 0.0 && i.x2_norm() == 0.0));
        let rep = pvar_norm(&x, &LinearControl::unit(1.0));
        assert_eq!(rep.norm, 0.0);
        assert_eq!(rep.pairs_checked, 10);
    }

    #[test]
    fn bracket_is_additive() {
        let base = Partition::uniform(8, 1.0).unwrap();
        let x = sample_ito_ebm(2, &base, 4, 3, 2.1).unwrap();
        let total = x.increment_by_index(0, 8).bracket();
        let sum = (0..8).fold(Array2::<f64>::zeros((2, 2)), |acc, k| acc + x.increment_by_index(k, k + 1).bracket());
        for (a, b) in total.iter().zip(sum.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ebm_is_deterministic_and_x1_independent_of_sub() {
        let base = Partition::uniform(16, 1.0).unwrap();
        let a = sample_ito_ebm(2, &base, 8, 11, 2.1).unwrap();
        let b = sample_ito_ebm(2, &base, 8, 11, 2.1).unwrap();
        let c = sample_ito_ebm(2, &base, 16, 11, 2.1).unwrap();
        for ((ia, ib), ic) in a.increments().iter().zip(b.increments()).zip(c.increments()) {
            assert!(ia.x1.iter().zip(ib.x1.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
            assert!(ia.x2.iter().zip(ib.x2.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
            assert_eq!(ia.x1, ic.x1);
        }
        let other = sample_ito_ebm(2, &base, 8, 12, 2.1).unwrap();
        assert_ne!(a.increments()[0].x1, other.increments()[0].x1);
    }

    #[test]
    fn ebm_rejects_zero_substeps() {
        let base = Partition::uniform(2, 1.0).unwrap();
        assert!(sample_ito_ebm(1, &base, 0, 0, 2.1).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let base = Partition::uniform(5, 0.5).unwrap();
        let x = sample_ito_ebm(2, &base, 3, 9, 2.2).unwrap();
        let mut bytes = Vec::new();
        x.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 * (3 + 6 + 5 * (2 + 4)));
        let y = GridRoughPath::read_from(bytes.as_slice()).unwrap();
        assert_eq!(y.grid(), x.grid());
        assert_eq!(y.p(), 2.2);
        assert_eq!(y.increments(), x.increments());
        assert!(GridRoughPath::read_from(&bytes[..20]).is_err());
    }

    #[test]
    fn pvar_norm_of_line_lift() {
        let target = Partition::uniform(8, 1.0).unwrap();
        let x = lift_function(|t| array![t, t], &target, 64, 2.0).unwrap();
        let rep = pvar_norm(&x, &LinearControl::unit(1.0));
        // brute-force enumeration over node pairs
        let pts = target.points();
        let mut brute = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let inc = x.compose_range(i, j);
                let o = pts[j] - pts[i];
                brute = brute.max(inc.x1_norm() / o.sqrt() + inc.x2_norm() / o);
            }
        }
        assert!((rep.norm - brute).abs() < 1e-12);
        assert_eq!(rep.argmax, Some((0, 8)));
        // first-level term alone at the full interval is sqrt(2) * T^(1/2)
        assert!(rep.norm >= 2f64.sqrt());
    }

    #[test]
    fn pvar_flags_zero_control_with_motion() {
        let target = Partition::uniform(2, 1.0).unwrap();
        let x = lift_function(|t| array![t], &target, 2, 2.0).unwrap();
        let rep = pvar_norm(&x, &LinearControl::new(0.0, 1.0));
        assert!(rep.infinite);
    }

    #[test]
    fn grid_control_is_additive() {
        let base = Partition::uniform(10, 1.0).unwrap();
        let x = sample_ito_ebm(1, &base, 2, 1, 2.5).unwrap();
        let omega = x.pvar_control();
        let times: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        assert!(crate::control::superadditivity_defect(&omega, &times) <= 0.0);
        assert!((omega.eval(0.0, 0.5) + omega.eval(0.5, 1.0) - omega.eval(0.0, 1.0)).abs() < 1e-12);
        for &h in &[0.05, 0.13, 0.5, 0.99] {
            let scanned = (0..=10_000)
                .map(|k| (1.0 - h) * k as f64 / 10_000.0)
                .map(|s| omega.eval(s, s + h))
                .fold(0.0, f64::max);
            assert!(omega.modulus(h) >= scanned - 1e-12);
            assert!(omega.modulus(h) <= omega.eval(0.0, 1.0));
        }
    }
}
