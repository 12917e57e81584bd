//! Driver sources: deterministic paths lifted on a grid, Brownian samples and files.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ndarray::Array1;

use crate::error::{Result, SewingError};
use crate::partition::Partition;
use crate::rough_path::{lift_function, sample_ito_ebm, GridRoughPath};

/// Produces a level-2 path on a given grid.
pub trait DriverSource: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// Hoelder exponent of the first level, used for Young flows and controls.
    fn holder(&self) -> f64;
    fn build(&self, grid: &Partition, seed: u64) -> Result<GridRoughPath>;
}

/// `x_t = t`, repeated in every component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineDriver {
    pub dim: usize,
}

impl DriverSource for LineDriver {
    fn name(&self) -> String {
        format!("line:d={}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn holder(&self) -> f64 {
        1.0
    }
    fn build(&self, grid: &Partition, _seed: u64) -> Result<GridRoughPath> {
        let d = self.dim;
        lift_function(|t| Array1::from_elem(d, t), grid, 1, 2.0)
    }
}

/// `x^0_t = t` and `x^c_t = sin(2 pi c t) / (2 pi c)` for `c >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothDriver {
    pub dim: usize,
    pub sub: usize,
}

impl DriverSource for SmoothDriver {
    fn name(&self) -> String {
        format!("smooth:d={}:sub={}", self.dim, self.sub)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn holder(&self) -> f64 {
        1.0
    }
    fn build(&self, grid: &Partition, _seed: u64) -> Result<GridRoughPath> {
        let d = self.dim;
        let path = move |t: f64| {
            Array1::from_shape_fn(d, |c| {
                if c == 0 {
                    t
                } else {
                    let w = 2.0 * PI * c as f64;
                    (w * t).sin() / w
                }
            })
        };
        lift_function(path, grid, self.sub, 2.0)
    }
}

/// `x_t = sum_{k < terms} 2^{-alpha k} cos(2^k pi t)` in every component, phase-shifted per component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weierstrass {
    pub alpha: f64,
    pub terms: u32,
    pub dim: usize,
    pub sub: usize,
}

impl Weierstrass {
    pub fn eval(&self, t: f64, component: usize) -> f64 {
        let shift = component as f64 * 0.5;
        (0..self.terms)
            .map(|k| 2f64.powf(-self.alpha * k as f64) * (2f64.powi(k as i32) * PI * (t + shift)).cos())
            .sum()
    }
}

impl DriverSource for Weierstrass {
    fn name(&self) -> String {
        format!("weierstrass:alpha={}:terms={}:d={}", self.alpha, self.terms, self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn holder(&self) -> f64 {
        self.alpha
    }
    fn build(&self, grid: &Partition, _seed: u64) -> Result<GridRoughPath> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SewingError::InvalidParameter(format!("alpha = {} outside (0, 1]", self.alpha)));
        }
        let me = *self;
        // p-variation of an alpha-Hoelder path
        let p = (1.0 / self.alpha).max(1.0);
        lift_function(move |t| Array1::from_shape_fn(me.dim, |c| me.eval(t, c)), grid, self.sub, p)
    }
}

/// Enhanced Ito Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EbmDriver {
    pub dim: usize,
    pub sub: usize,
    pub p: f64,
}

impl DriverSource for EbmDriver {
    fn name(&self) -> String {
        format!("ebm:d={}:sub={}:p={}", self.dim, self.sub, self.p)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn holder(&self) -> f64 {
        1.0 / self.p
    }
    fn build(&self, grid: &Partition, seed: u64) -> Result<GridRoughPath> {
        sample_ito_ebm(self.dim, grid, self.sub, seed, self.p)
    }
}

/// A path stored with [`GridRoughPath::write_to`], coarsened to the requested grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FileDriver {
    pub path: PathBuf,
    pub dim: usize,
    pub p: f64,
}

impl FileDriver {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let x = load_path(path.as_ref())?;
        Ok(Self {
            path: path.as_ref().to_path_buf(),
            dim: x.dim(),
            p: x.p(),
        })
    }
}

impl DriverSource for FileDriver {
    fn name(&self) -> String {
        format!("file:path={}", self.path.display())
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn holder(&self) -> f64 {
        1.0 / self.p
    }
    fn build(&self, grid: &Partition, _seed: u64) -> Result<GridRoughPath> {
        load_path(&self.path)?.coarsen(grid)
    }
}

pub fn load_path(path: &Path) -> Result<GridRoughPath> {
    GridRoughPath::read_from(BufReader::new(File::open(path)?))
}

pub fn save_path(x: &GridRoughPath, path: &Path) -> Result<()> {
    x.write_to(BufWriter::new(File::create(path)?))
}
