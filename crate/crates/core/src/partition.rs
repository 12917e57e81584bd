//! Partitions of `[0, T]`, refinement, and the mesh gauge `mu`.

use serde::{Deserialize, Serialize};

use crate::control::{Control, Remainder};
use crate::error::{Result, SewingError};

/// Relative tolerance used to identify two time points.
pub const TIME_TOL: f64 = 1e-12;

/// Strictly increasing times `0 = t_0 < ... < t_n = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<f64>,
}

/// How [`Partition::refine`] adds points.
#[derive(Clone, Debug, PartialEq)]
pub enum Refinement {
    /// Halve every interval, `levels` times.
    Dyadic(u32),
    /// Insert the midpoint of every interval of maximal length.
    InsertMidpoints,
    /// Insert the given interior points.
    Custom(Vec<f64>),
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(SewingError::InvalidPartition("needs at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(SewingError::InvalidPartition(format!(
                "first point must be 0, got {}",
                points[0]
            )));
        }
        for w in points.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(SewingError::InvalidPartition(format!(
                    "points not strictly increasing near {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { points })
    }

    /// `n` equal steps on `[0, horizon]`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) {
            return Err(SewingError::InvalidPartition(format!(
                "uniform partition needs n >= 1 and T > 0 (n={n}, T={horizon})"
            )));
        }
        let mut pts: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        pts[n] = horizon;
        Self::new(pts)
    }

    /// `2^level` equal steps on `[0, horizon]`.
    pub fn dyadic(level: u32, horizon: f64) -> Result<Self> {
        Self::uniform(1usize << level, horizon)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn min_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn tol(&self) -> f64 {
        TIME_TOL * self.horizon().max(1.0)
    }

    /// Index of the node equal to `t` (within tolerance).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = self.tol();
        let i = self.points.partition_point(|&p| p < t - tol);
        (i < self.points.len() && (self.points[i] - t).abs() <= tol).then_some(i)
    }

    /// True when every node of `self` is a node of `other`.
    pub fn is_nested_in(&self, other: &Partition) -> bool {
        (self.horizon() - other.horizon()).abs() <= self.tol()
            && self.points.iter().all(|&t| other.index_of(t).is_some())
    }

    /// Indices in `fine` of each node of `self`.
    pub fn embedding_in(&self, fine: &Partition) -> Result<Vec<usize>> {
        if (self.horizon() - fine.horizon()).abs() > self.tol() {
            return Err(SewingError::NotNested("horizons differ".into()));
        }
        self.points
            .iter()
            .map(|&t| {
                fine.index_of(t)
                    .ok_or_else(|| SewingError::NotNested(format!("point {t} missing")))
            })
            .collect()
    }

    pub fn refine(&self, rule: &Refinement) -> Result<Partition> {
        match rule {
            Refinement::Dyadic(levels) => {
                let mut pts = self.points.clone();
                for _ in 0..*levels {
                    let mut next = Vec::with_capacity(2 * pts.len() - 1);
                    for w in pts.windows(2) {
                        next.push(w[0]);
                        next.push(0.5 * (w[0] + w[1]));
                    }
                    next.push(*pts.last().unwrap());
                    pts = next;
                }
                Partition::new(pts)
            }
            Refinement::InsertMidpoints => {
                let mesh = self.mesh();
                let mut pts = Vec::with_capacity(2 * self.points.len());
                for w in self.points.windows(2) {
                    pts.push(w[0]);
                    if w[1] - w[0] >= mesh * (1.0 - 1e-12) {
                        pts.push(0.5 * (w[0] + w[1]));
                    }
                }
                pts.push(self.horizon());
                Partition::new(pts)
            }
            Refinement::Custom(extra) => {
                let mut pts = self.points.clone();
                for &t in extra {
                    if !(t > 0.0 && t < self.horizon()) {
                        return Err(SewingError::InvalidPartition(format!(
                            "custom point {t} outside (0, T)"
                        )));
                    }
                    if self.index_of(t).is_some() {
                        return Err(SewingError::InvalidPartition(format!(
                            "duplicate point {t}"
                        )));
                    }
                    pts.push(t);
                }
                pts.sort_by(|a, b| a.total_cmp(b));
                if pts.windows(2).any(|w| w[1] - w[0] <= self.tol()) {
                    return Err(SewingError::InvalidPartition("duplicate custom points".into()));
                }
                Partition::new(pts)
            }
        }
    }

    /// Sub-partition keeping every `stride`-th node (the last node is always kept).
    pub fn coarsen(&self, stride: usize) -> Result<Partition> {
        if stride == 0 || (self.intervals() % stride) != 0 {
            return Err(SewingError::InvalidPartition(format!(
                "stride {stride} does not divide {} intervals",
                self.intervals()
            )));
        }
        Partition::new(self.points.iter().step_by(stride).copied().collect())
    }
}

/// `mu_{s,t}(pi)`: the worst `varpi(omega) / omega` over intervals of `pi` meeting `[s, t]`.
///
/// Intervals with zero control contribute zero.
pub fn mu(pi: &Partition, omega: &dyn Control, varpi: &dyn Remainder, s: f64, t: f64) -> f64 {
    pi.points()
        .windows(2)
        .filter(|w| w[1] > s && w[0] < t)
        .map(|w| {
            let o = omega.eval(w[0], w[1]);
            if o > 0.0 {
                varpi.eval(o) / o
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}
