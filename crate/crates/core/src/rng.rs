//! Keyed random numbers on top of ChaCha8.
//!
//! Every draw is a pure function of `(seed, stream, index)`, so a Monte Carlo
//! run can be split across threads or refined without shared generator state.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Keyed generator: a seed from which sub-streams and indexed draws are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn engine(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Derive an independent generator for a sub-stream (path id, interval, ...).
    pub fn substream(&self, stream: u64) -> Self {
        let mut g = self.engine();
        g.set_stream(stream);
        Self { seed: g.next_u64() }
    }

    pub fn bits(&self, index: u64) -> u64 {
        let mut g = self.engine();
        g.set_word_pos(2 * index as u128);
        g.next_u64()
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&self, index: u64) -> f64 {
        open_unit(self.bits(index))
    }

    /// Standard normal draw number `index` (Box-Muller on two keyed uniforms).
    pub fn normal(&self, index: u64) -> f64 {
        let mut g = self.engine();
        g.set_word_pos(4 * index as u128);
        let u1 = open_unit(g.next_u64());
        let u2 = open_unit(g.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Sequential reader over this generator's stream.
    pub fn cursor(&self) -> Cursor {
        Cursor::new(*self)
    }
}

/// Sequential draws from a [`CounterRng`], for code that just wants "the next draw".
#[derive(Clone, Debug)]
pub struct Cursor {
    engine: ChaCha8Rng,
}

impl Cursor {
    pub fn new(rng: CounterRng) -> Self {
        Self { engine: rng.engine() }
    }

    pub fn uniform(&mut self) -> f64 {
        open_unit(self.engine.next_u64())
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.engine)
    }

    /// Uniform point in the closed ball of radius `r` in dimension `dim`.
    pub fn ball(&mut self, dim: usize, r: f64) -> Vec<f64> {
        let dir = self.unit(dim);
        let rad = r * self.uniform().powf(1.0 / dim as f64);
        dir.into_iter().map(|x| x * rad).collect()
    }

    pub fn unit(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}
