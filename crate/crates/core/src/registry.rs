//! Strategies selected by name: `name:key=value:key=value`.
//!
//! Each registry maps a name to a builder; unknown names and unused keys are errors.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array1;

use crate::control::{Control, LinearControl, PowerRemainder, Remainder};
use crate::drivers::{DriverSource, EbmDriver, FileDriver, LineDriver, SmoothDriver, Weierstrass};
use crate::error::{Result, SewingError};
use crate::field::{AffineField, ConstantField, Mollified, RoughField, SharedField, SinCosField, SinField, SinRotField};
use crate::flow::{DavieFlow, EulerYoungFlow, FnFlow, SharedFlow};
use crate::perturb::{ConstantDirection, Quantization, Rounding, SharedPerturbation, UniformNoise, ZeroPerturbation};
use crate::rough_path::GridRoughPath;

/// `2^-5`, `2^3` or any float literal.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || SewingError::MalformedSpec(s.to_string());
    if let Some((base, exp)) = s.split_once('^') {
        let base: f64 = base.trim().parse().map_err(|_| bad())?;
        let exp: f64 = exp.trim().parse().map_err(|_| bad())?;
        return Ok(base.powf(exp));
    }
    s.parse().map_err(|_| bad())
}

/// A parsed `name:key=value` string. Keys read through the accessors are marked used.
#[derive(Debug)]
pub struct Spec {
    pub name: String,
    params: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl FromStr for Spec {
    type Err = SewingError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default().trim();
        if name.is_empty() {
            return Err(SewingError::MalformedSpec(s.to_string()));
        }
        let mut params = BTreeMap::new();
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| SewingError::MalformedSpec(s.to_string()))?;
            let k = k.trim();
            if k.is_empty() || params.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(SewingError::MalformedSpec(s.to_string()));
            }
        }
        Ok(Self {
            name: name.to_string(),
            params,
            used: RefCell::new(BTreeSet::new()),
        })
    }
}

impl fmt::Display for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, v) in &self.params {
            write!(f, ":{k}={v}")?;
        }
        Ok(())
    }
}

impl Spec {
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.params.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), parse_number)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| SewingError::MalformedSpec(format!("{key}={v}")))
        })
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| SewingError::MalformedSpec(format!("{key}={v}")))
        })
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| SewingError::MalformedSpec(format!("`{}` needs `{key}=`", self.name)))
    }

    /// Rejects keys that no accessor asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.params.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(SewingError::MalformedSpec(format!("`{}` does not take `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

type Builder<T, C> = Box<dyn Fn(&Spec, &C) -> Result<T> + Send + Sync>;

pub struct Registry<T, C = ()> {
    kind: &'static str,
    entries: BTreeMap<&'static str, (&'static str, Builder<T, C>)>,
}

impl<T, C> Registry<T, C> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: &'static str,
        help: &'static str,
        build: impl Fn(&Spec, &C) -> Result<T> + Send + Sync + 'static,
    ) -> &mut Self {
        self.entries.insert(name, (help, Box::new(build)));
        self
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    /// `(name, help)` in name order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &'static str)> + '_ {
        self.entries.iter().map(|(n, (h, _))| (*n, *h))
    }

    pub fn build_spec(&self, spec: &Spec, ctx: &C) -> Result<T> {
        let (_, build) = self.entries.get(spec.name.as_str()).ok_or_else(|| SewingError::Unknown {
            kind: self.kind,
            name: spec.name.clone(),
        })?;
        let out = build(spec, ctx)?;
        spec.finish()?;
        Ok(out)
    }

    pub fn build_with(&self, text: &str, ctx: &C) -> Result<T> {
        self.build_spec(&text.parse()?, ctx)
    }
}

impl<T> Registry<T, ()> {
    pub fn build(&self, text: &str) -> Result<T> {
        self.build_with(text, &())
    }
}

fn mollified(spec: &Spec, field: SharedField) -> Result<SharedField> {
    match spec.raw("mollify") {
        Some(h) => Ok(Arc::new(Mollified::new(field, parse_number(h)?)?)),
        None => Ok(field),
    }
}

/// Rows separated by `;`, entries by `,`.
fn parse_matrix(text: &str) -> Result<ndarray::Array2<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| row.split(',').map(parse_number).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let n = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(SewingError::MalformedSpec(format!("matrix={text}")));
    }
    ndarray::Array2::from_shape_vec((rows.len(), n), rows.concat()).map_err(|_| SewingError::MalformedSpec(format!("matrix={text}")))
}

/// Every field accepts `mollify=<radius>`.
pub fn fields() -> Registry<SharedField> {
    let mut r = Registry::new("field");
    r.register("zero", "f = 0 (dim, noise)", |s, _| {
        let m = s.usize_or("dim", 1)?;
        let d = s.usize_or("noise", 1)?;
        mollified(s, Arc::new(ConstantField { value: ndarray::Array2::zeros((m, d)) }))
    })
    .register("constant", "f = c in every entry (c, dim, noise)", |s, _| {
        let c = s.f64_or("c", 1.0)?;
        let m = s.usize_or("dim", 1)?;
        let d = s.usize_or("noise", 1)?;
        mollified(s, Arc::new(ConstantField { value: ndarray::Array2::from_elem((m, d), c) }))
    })
    .register("linear", "f(a) = c a, or f(a) = M a with matrix=m11,m12;m21,m22 (c, matrix)", |s, _| {
        let field = match s.raw("matrix") {
            Some(m) => AffineField::from_matrix(&parse_matrix(m)?)?,
            None => AffineField::scalar(s.f64_or("c", 1.0)?),
        };
        mollified(s, Arc::new(field))
    })
    .register("rotation", "planar f(a) = (-a2, a1)", |s, _| mollified(s, Arc::new(AffineField::rotation())))
    .register("sin", "scalar f(a) = sin a", |s, _| mollified(s, Arc::new(SinField)))
    .register("sincos", "f(a) = (sin a, cos a), two noises", |s, _| mollified(s, Arc::new(SinCosField)))
    .register("sinrot", "planar trigonometric field, two noises", |s, _| mollified(s, Arc::new(SinRotField)))
    .register("rough", "diagonal C^{1+gamma} field (gamma, base, dim)", |s, _| {
        let f = RoughField::new(s.f64_or("gamma", 0.5)?, s.f64_or("base", 1.0)?, s.usize_or("dim", 1)?)?;
        mollified(s, Arc::new(f))
    });
    r
}

pub fn drivers() -> Registry<Arc<dyn DriverSource>> {
    let mut r = Registry::new("driver");
    r.register("line", "x_t = t (d)", |s, _| Ok(Arc::new(LineDriver { dim: s.usize_or("d", 1)? }) as Arc<dyn DriverSource>))
        .register("smooth", "x_t = (t, sin(2 pi t)/(2 pi), ...) (d, sub)", |s, _| {
            Ok(Arc::new(SmoothDriver {
                dim: s.usize_or("d", 1)?,
                sub: s.usize_or("sub", 8)?,
            }) as Arc<dyn DriverSource>)
        })
        .register("weierstrass", "sum 2^{-alpha k} cos(2^k pi t) (alpha, terms, d, sub)", |s, _| {
            Ok(Arc::new(Weierstrass {
                alpha: s.f64_or("alpha", 0.75)?,
                terms: s.usize_or("terms", 16)? as u32,
                dim: s.usize_or("d", 1)?,
                sub: s.usize_or("sub", 1)?,
            }) as Arc<dyn DriverSource>)
        })
        .register("ebm", "enhanced Ito Brownian motion (d, sub, p)", |s, _| {
            Ok(Arc::new(EbmDriver {
                dim: s.usize_or("d", 1)?,
                sub: s.usize_or("sub", 4)?,
                p: s.f64_or("p", 2.1)?,
            }) as Arc<dyn DriverSource>)
        })
        .register("file", "binary path file (path)", |s, _| {
            Ok(Arc::new(FileDriver::open(s.require("path")?)?) as Arc<dyn DriverSource>)
        })
        .register("lift", "binary path file (file)", |s, _| {
            Ok(Arc::new(FileDriver::open(s.require("file")?)?) as Arc<dyn DriverSource>)
        });
    r
}

pub fn remainders() -> Registry<Arc<dyn Remainder>> {
    fn power(s: &Spec, _: &()) -> Result<Arc<dyn Remainder>> {
        let theta = s.f64_or("theta", 1.5)?;
        if !(theta > 1.0) {
            return Err(SewingError::InvalidParameter(format!("remainder exponent {theta} <= 1")));
        }
        Ok(Arc::new(PowerRemainder::new(theta)))
    }
    let mut r = Registry::new("remainder");
    r.register("power", "varpi(x) = x^theta (theta)", power)
        .register("pow", "same as power", power);
    r
}

/// Controls are built against the driver in play.
pub struct ControlContext {
    pub driver: Arc<GridRoughPath>,
}

pub fn controls() -> Registry<Arc<dyn Control>, ControlContext> {
    let mut r = Registry::new("control");
    r.register("linear", "omega = scale (t - s) (scale)", |s, c: &ControlContext| {
        Ok(Arc::new(LinearControl::new(s.f64_or("scale", 1.0)?, c.driver.horizon())) as Arc<dyn Control>)
    })
    .register("pvar", "p-variation control of the driver", |_, c: &ControlContext| {
        Ok(Arc::new(c.driver.pvar_control()) as Arc<dyn Control>)
    });
    r
}

pub struct FlowContext {
    pub field: SharedField,
    pub driver: Arc<GridRoughPath>,
    pub omega: Arc<dyn Control>,
    /// Hoelder exponent of the driver
    pub holder: f64,
    pub region: f64,
}

pub fn flows() -> Registry<SharedFlow, FlowContext> {
    let mut r = Registry::new("flow");
    r.register("davie", "a + f(a) x1 + Df f(a) x2", |_, c: &FlowContext| {
        Ok(Arc::new(DavieFlow::new(c.field.clone(), c.driver.clone(), c.omega.clone(), c.region)?) as SharedFlow)
    })
    .register("euler", "a + f(a) x1 (alpha = driver Hoelder exponent)", |s, c: &FlowContext| {
        let alpha = s.f64_or("alpha", c.holder)?;
        Ok(Arc::new(EulerYoungFlow::new(c.field.clone(), c.driver.clone(), alpha, c.region)?) as SharedFlow)
    })
    .register("exact-linear", "exp(c (t - s)) a, for dy = c y dt (c)", |s, c: &FlowContext| {
        let flow = FnFlow::linear_ode(s.f64_or("c", 1.0)?, c.field.state_dim(), c.driver.horizon(), c.region)
            .on_nodes(c.driver.grid().clone());
        Ok(Arc::new(flow) as SharedFlow)
    });
    r
}

pub struct PerturbationContext {
    pub dim: usize,
    pub omega: Arc<dyn Control>,
    pub varpi: Arc<dyn Remainder>,
}

fn uniform_noise(s: &Spec, c: &PerturbationContext) -> Result<SharedPerturbation> {
    Ok(Arc::new(UniformNoise {
        eta: s.f64_or("eta", 1e-3)?,
        dim: c.dim,
        seed: s.u64_or("seed", 0)?,
        omega: c.omega.clone(),
        varpi: c.varpi.clone(),
    }))
}

pub fn perturbations() -> Registry<SharedPerturbation, PerturbationContext> {
    let mut r = Registry::new("perturbation");
    r.register("zero", "no perturbation", |_, _: &PerturbationContext| Ok(Arc::new(ZeroPerturbation) as SharedPerturbation))
        .register("quant", "round images to 2^-bits (bits, rounding=chop|nearest)", |s, _: &PerturbationContext| {
            let rounding = match s.str_or("rounding", "chop") {
                "chop" => Rounding::Chop,
                "nearest" => Rounding::Nearest,
                other => return Err(SewingError::MalformedSpec(format!("rounding={other}"))),
            };
            Ok(Arc::new(Quantization::new(s.usize_or("bits", 20)? as u32, rounding)?) as SharedPerturbation)
        })
        .register("noise", "eta varpi(omega) times a keyed unit-ball draw (eta, seed)", uniform_noise)
        .register("uniform", "same as noise", uniform_noise)
        .register("shift", "eta varpi(omega) along (1, ..., 1) (eta)", |s, c: &PerturbationContext| {
            Ok(Arc::new(ConstantDirection::new(
                s.f64_or("eta", 1e-3)?,
                Array1::ones(c.dim),
                c.omega.clone(),
                c.varpi.clone(),
            )?) as SharedPerturbation)
        });
    r
}
