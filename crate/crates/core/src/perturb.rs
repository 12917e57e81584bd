//! Perturbations `eps_{t,s}` of almost flows and the perturbed flow `phi + eps`.

use std::sync::Arc;

use ndarray::Array1;

use crate::control::{Control, Remainder};
use crate::error::{Result, SewingError};
use crate::flow::{AlmostFlow, Envelope, SharedFlow};
use crate::partition::Partition;
use crate::rng::CounterRng;

pub trait Perturbation: Send + Sync {
    fn name(&self) -> String;
    /// `eps_{t,s}(a)`; `image` is the unperturbed value `phi_{t,s}(a)`.
    fn eval(&self, s: f64, t: f64, a: &Array1<f64>, image: &Array1<f64>) -> Array1<f64>;
    /// Known bound on `||eps||_E`, if any. Otherwise it must be estimated by sampling.
    fn eta(&self) -> Option<f64>;
}

pub type SharedPerturbation = Arc<dyn Perturbation>;

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPerturbation;

impl Perturbation for ZeroPerturbation {
    fn name(&self) -> String {
        "zero".into()
    }
    fn eval(&self, _s: f64, _t: f64, a: &Array1<f64>, _image: &Array1<f64>) -> Array1<f64> {
        Array1::zeros(a.len())
    }
    fn eta(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `eps_{t,s}(a) = eta varpi(omega_{s,t}) u` for a fixed unit vector `u`.
pub struct ConstantDirection {
    pub eta: f64,
    pub direction: Array1<f64>,
    pub omega: Arc<dyn Control>,
    pub varpi: Arc<dyn Remainder>,
}

impl ConstantDirection {
    pub fn new(eta: f64, direction: Array1<f64>, omega: Arc<dyn Control>, varpi: Arc<dyn Remainder>) -> Result<Self> {
        let n = direction.dot(&direction).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(SewingError::InvalidParameter("direction must be a nonzero vector".into()));
        }
        Ok(Self {
            eta,
            direction: direction / n,
            omega,
            varpi,
        })
    }
}

impl Perturbation for ConstantDirection {
    fn name(&self) -> String {
        format!("const:eta={}", self.eta)
    }
    fn eval(&self, s: f64, t: f64, _a: &Array1<f64>, _image: &Array1<f64>) -> Array1<f64> {
        &self.direction * (self.eta * self.varpi.eval(self.omega.eval(s, t)))
    }
    fn eta(&self) -> Option<f64> {
        Some(self.eta.abs())
    }
}

/// Rounding direction of [`Quantization`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    /// `floor`: a one-sided error that accumulates linearly along a scheme
    Chop,
    Nearest,
}

/// Round-off model: `eps_{t,s}(a) = Q(phi_{t,s}(a)) - phi_{t,s}(a)` with `Q` rounding to `2^-bits`.
#[derive(Clone, Copy, Debug)]
pub struct Quantization {
    pub bits: u32,
    pub rounding: Rounding,
}

impl Quantization {
    pub fn new(bits: u32, rounding: Rounding) -> Result<Self> {
        if bits == 0 || bits > 60 {
            return Err(SewingError::InvalidParameter(format!("quantization bits {bits} outside 1..=60")));
        }
        Ok(Self { bits, rounding })
    }

    pub fn step(&self) -> f64 {
        2f64.powi(-(self.bits as i32))
    }
}

impl Perturbation for Quantization {
    fn name(&self) -> String {
        match self.rounding {
            Rounding::Chop => format!("quant:bits={}", self.bits),
            Rounding::Nearest => format!("quant:bits={}:mode=nearest", self.bits),
        }
    }
    fn eval(&self, _s: f64, _t: f64, _a: &Array1<f64>, image: &Array1<f64>) -> Array1<f64> {
        let q = self.step();
        image.mapv(|v| {
            let r = match self.rounding {
                Rounding::Chop => (v / q).floor() * q,
                Rounding::Nearest => (v / q).round() * q,
            };
            r - v
        })
    }
    fn eta(&self) -> Option<f64> {
        None
    }
}

/// `eps_{t,s}(a) = eta varpi(omega_{s,t}) v_{s,t}` with `v_{s,t}` a keyed draw from the unit ball.
pub struct UniformNoise {
    pub eta: f64,
    pub dim: usize,
    pub seed: u64,
    pub omega: Arc<dyn Control>,
    pub varpi: Arc<dyn Remainder>,
}

impl Perturbation for UniformNoise {
    fn name(&self) -> String {
        format!("uniform:eta={}:seed={}", self.eta, self.seed)
    }
    fn eval(&self, s: f64, t: f64, _a: &Array1<f64>, _image: &Array1<f64>) -> Array1<f64> {
        let mut cur = CounterRng::new(self.seed)
            .substream(s.to_bits())
            .substream(t.to_bits())
            .cursor();
        Array1::from(cur.ball(self.dim, 1.0)) * (self.eta * self.varpi.eval(self.omega.eval(s, t)))
    }
    fn eta(&self) -> Option<f64> {
        Some(self.eta.abs())
    }
}

/// `psi_{t,s} = phi_{t,s} + eps_{t,s}` with envelope `(delta (1 + eta), M + (2 + delta_T) eta)`.
pub struct PerturbedFlow {
    base: SharedFlow,
    eps: SharedPerturbation,
    eta: f64,
}

impl PerturbedFlow {
    /// Requires a perturbation with a known `eta`; see [`PerturbedFlow::with_eta`] otherwise.
    pub fn new(base: SharedFlow, eps: SharedPerturbation) -> Result<Self> {
        let eta = eps.eta().ok_or_else(|| {
            SewingError::InvalidParameter(format!("perturbation {} has no certified eta; estimate it first", eps.name()))
        })?;
        Ok(Self { base, eps, eta })
    }

    /// Use a sampled estimate of `||eps||_E`.
    pub fn with_eta(base: SharedFlow, eps: SharedPerturbation, eta: f64) -> Self {
        Self { base, eps, eta }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn base(&self) -> &SharedFlow {
        &self.base
    }
}

impl AlmostFlow for PerturbedFlow {
    fn tag(&self) -> String {
        "perturbed".into()
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn horizon(&self) -> f64 {
        self.base.horizon()
    }
    fn apply(&self, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64> {
        let image = self.base.apply(s, t, a);
        let e = self.eps.eval(s, t, a, &image);
        image + e
    }
    fn envelope(&self) -> Envelope {
        let env = self.base.envelope();
        let delta_t = env.delta.eval(self.base.horizon());
        env.perturbed(self.eta, delta_t)
    }
    fn nodes(&self) -> Option<&Partition> {
        self.base.nodes()
    }
    fn remainder_theta(&self) -> Option<f64> {
        self.base.remainder_theta()
    }
}
