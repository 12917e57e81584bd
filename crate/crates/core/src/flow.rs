//! Almost flows `phi_{t,s} = id + hat phi_{t,s}` with their envelopes `(delta, M)`.
//!
//! Flows built on a grid rough path are only defined at driver nodes; asking for
//! any other time is a programming error and panics. Schemes check their
//! partitions against [`AlmostFlow::nodes`] before running.

use std::sync::{Arc, OnceLock};

use ndarray::Array1;

use crate::control::{Control, DeltaFunction};
use crate::error::{Result, SewingError};
use crate::field::{apply_first, apply_second, f2_from, SharedField, VectorField};
use crate::partition::Partition;
use crate::rng::CounterRng;
use crate::rough_path::{pvar_norm, GridRoughPath};

/// `sup_{t-s=h} |hat phi_{t,s}| <= delta(h)` and `|d phi_{t,s,r}| <= M varpi(omega_{r,t})`.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub delta: DeltaFunction,
    pub m: f64,
}

impl Envelope {
    pub fn new(delta: DeltaFunction, m: f64) -> Self {
        Self { delta, m }
    }

    /// Envelope of `phi + eps` for a perturbation with `||eps||_E <= eta`.
    pub fn perturbed(&self, eta: f64, delta_t: f64) -> Self {
        Self {
            delta: self.delta.scaled(1.0 + eta),
            m: self.m + (2.0 + delta_t) * eta,
        }
    }

    pub fn with_m(&self, m: f64) -> Self {
        Self {
            delta: self.delta.clone(),
            m,
        }
    }
}

pub trait AlmostFlow: Send + Sync {
    /// Provenance tag: `davie`, `euler`, `perturbed`, or a custom label.
    fn tag(&self) -> String;
    fn dim(&self) -> usize;
    fn horizon(&self) -> f64;
    /// `phi_{t,s}(a)` for `s <= t`.
    fn apply(&self, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64>;
    fn envelope(&self) -> Envelope;
    /// Times at which the flow can be evaluated; `None` means any time in `[0, T]`.
    fn nodes(&self) -> Option<&Partition> {
        None
    }
    /// `theta` of the natural remainder `varpi(x) = x^theta`, when the flow knows it.
    fn remainder_theta(&self) -> Option<f64> {
        None
    }
}

pub type SharedFlow = Arc<dyn AlmostFlow>;

/// `hat phi_{t,s}(a) = phi_{t,s}(a) - a`.
pub fn increment(flow: &dyn AlmostFlow, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64> {
    flow.apply(s, t, a) - a
}

/// `d phi_{t,s,r}(a) = phi_{t,s}(phi_{s,r}(a)) - phi_{t,r}(a)`.
pub fn defect_at(flow: &dyn AlmostFlow, r: f64, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64> {
    flow.apply(s, t, &flow.apply(r, s, a)) - flow.apply(r, t, a)
}

/// Every node of `pi` must be an evaluation time of `flow`.
pub fn check_partition(flow: &dyn AlmostFlow, pi: &Partition) -> Result<()> {
    if (pi.horizon() - flow.horizon()).abs() > crate::partition::TIME_TOL {
        return Err(SewingError::InvalidPartition(format!(
            "partition horizon {} differs from flow horizon {}",
            pi.horizon(),
            flow.horizon()
        )));
    }
    if let Some(nodes) = flow.nodes() {
        for &t in pi.points() {
            if nodes.index_of(t).is_none() {
                return Err(SewingError::OffGrid(t));
            }
        }
    }
    Ok(())
}

pub(crate) fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn frob<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

/// Sizes of a field on the working ball `|a| <= region`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionScale {
    pub sup: f64,
    pub deriv_sup: f64,
    pub deriv_holder: f64,
    /// true when every entry comes from declared bounds
    pub declared: bool,
}

impl RegionScale {
    /// Declared bounds where available (an affine field's sup is `|f(0)| + |Df| R`),
    /// otherwise sampled suprema over 4096 points of the ball.
    pub fn of(field: &dyn VectorField, region: f64) -> Self {
        let b = field.bounds();
        let m = field.state_dim();
        let zero = Array1::zeros(m);
        let mut cur = CounterRng::new(0x5ca1e).cursor();
        let points: Vec<Array1<f64>> = (0..4096).map(|_| Array1::from(cur.ball(m, region))).collect();
        let sampled_df = || {
            points
                .iter()
                .filter_map(|a| field.deriv(a).map(|d| frob(d.iter())))
                .fold(0.0, f64::max)
        };
        let deriv_sup = b.deriv_sup.unwrap_or_else(sampled_df);
        let sup = b.sup.unwrap_or_else(|| {
            if b.deriv_sup.is_some() {
                frob(field.eval(&zero).iter()) + deriv_sup * region
            } else {
                points.iter().map(|a| frob(field.eval(a).iter())).fold(0.0, f64::max)
            }
        });
        let deriv_holder = b.deriv_holder.unwrap_or_else(|| {
            let rep = crate::field::estimate_holder(
                field,
                1,
                field.gamma(),
                &crate::field::PairSampler::new(m, region, 4096, 0x5ca1e),
            );
            rep.map(|r| r.estimate).unwrap_or(f64::INFINITY)
        });
        Self {
            sup,
            deriv_sup,
            deriv_holder,
            declared: b.sup.is_some() && b.deriv_sup.is_some() && b.deriv_holder.is_some(),
        }
    }

    pub fn lip_norm(&self) -> f64 {
        self.sup + self.deriv_sup + self.deriv_holder
    }
}

/// Davie approximation `phi_{t,s}(a) = a + f(a) x1_{s,t} + f2(a) x2_{s,t}`.
pub struct DavieFlow {
    field: SharedField,
    path: Arc<GridRoughPath>,
    omega: Arc<dyn Control>,
    region: f64,
    envelope: OnceLock<(Envelope, f64)>,
}

impl DavieFlow {
    pub fn new(field: SharedField, path: Arc<GridRoughPath>, omega: Arc<dyn Control>, region: f64) -> Result<Self> {
        if field.noise_dim() != path.dim() {
            return Err(SewingError::DimensionMismatch {
                expected: path.dim(),
                got: field.noise_dim(),
            });
        }
        if field.deriv(&Array1::zeros(field.state_dim())).is_none() {
            return Err(SewingError::MissingDerivative(field.name()));
        }
        if !(2.0..3.0).contains(&path.p()) {
            return Err(SewingError::RoughnessOutOfRange(path.p()));
        }
        Ok(Self {
            field,
            path,
            omega,
            region,
            envelope: OnceLock::new(),
        })
    }

    pub fn field(&self) -> &SharedField {
        &self.field
    }

    pub fn path(&self) -> &Arc<GridRoughPath> {
        &self.path
    }

    pub fn region(&self) -> f64 {
        self.region
    }

    /// Remainder exponent `(2 + gamma) / p`.
    pub fn remainder_exponent(&self) -> f64 {
        (2.0 + self.field.gamma()) / self.path.p()
    }

    fn node(&self, t: f64) -> usize {
        self.path
            .grid()
            .index_of(t)
            .unwrap_or_else(|| panic!("time {t} is not a driver node"))
    }

    /// One Davie step between driver nodes `i <= j`.
    pub fn step(&self, i: usize, j: usize, a: &Array1<f64>) -> Array1<f64> {
        assert!(i <= j, "Davie step needs i <= j, got ({i}, {j})");
        if i == j {
            return a.clone();
        }
        let d = self.path.dim();
        let mut x1 = vec![0.0; d];
        let mut x2 = vec![0.0; d * d];
        self.path.increment_into(i, j, &mut x1, &mut x2);
        let f = self.field.eval(a);
        let df = self.field.deriv(a).expect("checked at construction");
        a + &apply_first(&f, &x1) + &apply_second(&f2_from(&f, &df), &x2)
    }

    /// Sampled p-variation norm of the driver with respect to the flow's control.
    pub fn driver_norm(&self) -> f64 {
        self.analytic().1
    }

    fn analytic(&self) -> &(Envelope, f64) {
        self.envelope.get_or_init(|| {
            let p = self.path.p();
            let gamma = self.field.gamma();
            let scale = RegionScale::of(self.field.as_ref(), self.region);
            let pn = pvar_norm(&self.path, self.omega.as_ref()).norm;
            let s1 = scale.sup;
            let s2 = scale.deriv_sup * scale.sup;
            let omega = self.omega.clone();
            let delta = DeltaFunction::new(format!("davie[{s1:.3e},{s2:.3e},{pn:.3e}]"), move |h| {
                let w = omega.modulus(h);
                s1 * pn * w.powf(1.0 / p) + s2 * pn * w.powf(2.0 / p)
            });
            let n = scale.lip_norm();
            let total = self.omega.eval(0.0, self.path.horizon());
            let m = n.powi(2).max(n.powi(3)) * pn.powf(1.0 + gamma).max(pn.powi(3)) * total.max(1.0).powf((1.0 - gamma) / p);
            (Envelope::new(delta, m), pn)
        })
    }
}

impl AlmostFlow for DavieFlow {
    fn remainder_theta(&self) -> Option<f64> {
        Some(self.remainder_exponent())
    }

    fn tag(&self) -> String {
        "davie".into()
    }
    fn dim(&self) -> usize {
        self.field.state_dim()
    }
    fn horizon(&self) -> f64 {
        self.path.horizon()
    }
    fn apply(&self, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64> {
        self.step(self.node(s), self.node(t), a)
    }
    fn envelope(&self) -> Envelope {
        self.analytic().0.clone()
    }
    fn nodes(&self) -> Option<&Partition> {
        Some(self.path.grid())
    }
}

/// First-order (Euler / Young) flow `phi_{t,s}(a) = a + f(a) x_{s,t}` with `omega_{s,t} = t - s`.
pub struct EulerYoungFlow {
    field: SharedField,
    path: Arc<GridRoughPath>,
    alpha: f64,
    region: f64,
    envelope: OnceLock<Envelope>,
}

impl EulerYoungFlow {
    /// `alpha` is the declared Hoelder exponent of the driver. The field is
    /// used as a Lipschitz map, so the remainder is `varpi(x) = x^{2 alpha}`
    /// and the regularity budget is `2 alpha > 1`.
    pub fn new(field: SharedField, path: Arc<GridRoughPath>, alpha: f64, region: f64) -> Result<Self> {
        if field.noise_dim() != path.dim() {
            return Err(SewingError::DimensionMismatch {
                expected: path.dim(),
                got: field.noise_dim(),
            });
        }
        let f_exp = if field.deriv(&Array1::zeros(field.state_dim())).is_some() {
            1.0
        } else {
            field.gamma()
        };
        if !(alpha > 0.0 && alpha <= 1.0) || alpha * (1.0 + f_exp) <= 1.0 {
            return Err(SewingError::RegularityBudget(alpha * (1.0 + f_exp)));
        }
        Ok(Self {
            field,
            path,
            alpha,
            region,
            envelope: OnceLock::new(),
        })
    }

    pub fn remainder_exponent(&self) -> f64 {
        2.0 * self.alpha
    }

    fn node(&self, t: f64) -> usize {
        self.path
            .grid()
            .index_of(t)
            .unwrap_or_else(|| panic!("time {t} is not a driver node"))
    }

    pub fn step(&self, i: usize, j: usize, a: &Array1<f64>) -> Array1<f64> {
        assert!(i <= j, "Euler step needs i <= j, got ({i}, {j})");
        if i == j {
            return a.clone();
        }
        let mut x1 = vec![0.0; self.path.dim()];
        self.path.x1_into(i, j, &mut x1);
        a + &apply_first(&self.field.eval(a), &x1)
    }

    /// Sampled `sup |x_{s,t}| / (t - s)^alpha` over driver node pairs.
    pub fn driver_holder(&self) -> f64 {
        let pts = self.path.grid().points();
        let mut x1 = vec![0.0; self.path.dim()];
        let mut best = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                self.path.x1_into(i, j, &mut x1);
                let n = x1.iter().map(|v| v * v).sum::<f64>().sqrt();
                best = best.max(n / (pts[j] - pts[i]).powf(self.alpha));
            }
        }
        best
    }
}

impl AlmostFlow for EulerYoungFlow {
    fn remainder_theta(&self) -> Option<f64> {
        Some(self.remainder_exponent())
    }

    fn tag(&self) -> String {
        "euler".into()
    }
    fn dim(&self) -> usize {
        self.field.state_dim()
    }
    fn horizon(&self) -> f64 {
        self.path.horizon()
    }
    fn apply(&self, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64> {
        self.step(self.node(s), self.node(t), a)
    }
    fn envelope(&self) -> Envelope {
        self.envelope
            .get_or_init(|| {
                let scale = RegionScale::of(self.field.as_ref(), self.region);
                let x = self.driver_holder();
                let (s1, alpha) = (scale.sup, self.alpha);
                let delta = DeltaFunction::new(format!("euler[{s1:.3e},{x:.3e}]"), move |h| s1 * x * h.powf(alpha));
                // d phi = (f(a + f(a) x_{r,s}) - f(a)) x_{s,t}
                Envelope::new(delta, scale.deriv_sup * s1 * x * x)
            })
            .clone()
    }
    fn nodes(&self) -> Option<&Partition> {
        Some(self.path.grid())
    }
}

type FlowFn = dyn Fn(f64, f64, &Array1<f64>) -> Array1<f64> + Send + Sync;

/// Flow from a closure `(s, t, a) -> phi_{t,s}(a)`, e.g. exact ODE flows or affine maps.
#[derive(Clone)]
pub struct FnFlow {
    label: String,
    dim: usize,
    horizon: f64,
    f: Arc<FlowFn>,
    envelope: Envelope,
    nodes: Option<Partition>,
}

impl FnFlow {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        horizon: f64,
        envelope: Envelope,
        f: impl Fn(f64, f64, &Array1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            horizon,
            f: Arc::new(f),
            envelope,
            nodes: None,
        }
    }

    pub fn on_nodes(mut self, nodes: Partition) -> Self {
        self.nodes = Some(nodes);
        self
    }

    /// Exact flow of `dy = c y dt`: `phi_{t,s}(a) = exp(c (t - s)) a`.
    pub fn linear_ode(c: f64, dim: usize, horizon: f64, region: f64) -> Self {
        let delta = DeltaFunction::new(format!("exp[{c}]"), move |h| region * ((c.abs() * h).exp() - 1.0));
        Self::new(format!("exact:linear:c={c}"), dim, horizon, Envelope::new(delta, 0.0), move |s, t, a| {
            a * (c * (t - s)).exp()
        })
    }
}

impl AlmostFlow for FnFlow {
    fn tag(&self) -> String {
        self.label.clone()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn apply(&self, s: f64, t: f64, a: &Array1<f64>) -> Array1<f64> {
        (self.f)(s, t, a)
    }
    fn envelope(&self) -> Envelope {
        self.envelope.clone()
    }
    fn nodes(&self) -> Option<&Partition> {
        self.nodes.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::LinearControl;
    use crate::field::{AffineField, ConstantField, RoughField, SinField};
    use crate::rough_path::lift_function;
    use ndarray::array;

    fn line_driver(n: usize) -> Arc<GridRoughPath> {
        let grid = Partition::uniform(n, 1.0).unwrap();
        Arc::new(lift_function(|t| array![t], &grid, 1, 2.0).unwrap())
    }

    fn exact_line_driver(n: usize) -> Arc<GridRoughPath> {
        // x2 of x_t = t is (t-s)^2/2 exactly
        let grid = Partition::uniform(n, 1.0).unwrap();
        let incs = grid
            .points()
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                crate::rough_path::RoughIncrement::new(array![h], array![[h * h / 2.0]]).unwrap()
            })
            .collect();
        Arc::new(GridRoughPath::from_increments(grid, incs, 2.0).unwrap())
    }

    #[test]
    fn davie_linear_symbolic() {
        let x = exact_line_driver(2);
        let flow = DavieFlow::new(Arc::new(AffineField::scalar(1.0)), x, Arc::new(LinearControl::unit(1.0)), 2.0).unwrap();
        let g = |h: f64| 1.0 + h + h * h / 2.0;
        let a = array![1.0];
        assert!((flow.apply(0.0, 1.0, &a)[0] - g(1.0)).abs() < 1e-15);
        let d = defect_at(&flow, 0.0, 0.5, 1.0, &a)[0];
        let expect = g(0.5) * g(0.5) - g(1.0);
        assert!((d - expect).abs() < 1e-12);
        assert_eq!(flow.apply(0.5, 0.5, &a), a);
    }

    #[test]
    fn davie_constant_field_is_a_flow() {
        let x = line_driver(8);
        let c = ConstantField { value: array![[2.5]] };
        let flow = DavieFlow::new(Arc::new(c), x, Arc::new(LinearControl::unit(1.0)), 1.0).unwrap();
        let a = array![0.3];
        for &(r, s, t) in &[(0.0, 0.25, 1.0), (0.125, 0.5, 0.875)] {
            assert_eq!(defect_at(&flow, r, s, t, &a)[0], 0.0);
        }
        assert!((flow.apply(0.0, 1.0, &a)[0] - 2.8).abs() < 1e-15);
    }

    #[test]
    fn davie_rejects_bad_inputs() {
        let x = line_driver(4);
        let omega: Arc<dyn Control> = Arc::new(LinearControl::unit(1.0));
        let no_deriv = crate::field::FnField::new("abs", 1, 1, 1.0, |a| array![[a[0].abs()]]);
        assert!(matches!(
            DavieFlow::new(Arc::new(no_deriv), x.clone(), omega.clone(), 1.0),
            Err(SewingError::MissingDerivative(_))
        ));
        let young = Arc::new((*x).clone().with_p(1.5));
        assert!(matches!(
            DavieFlow::new(Arc::new(SinField), young, omega.clone(), 1.0),
            Err(SewingError::RoughnessOutOfRange(_))
        ));
        assert!(DavieFlow::new(Arc::new(crate::field::SinCosField), x, omega, 1.0).is_err());
    }

    #[test]
    #[should_panic(expected = "not a driver node")]
    fn off_grid_time_panics() {
        let flow = DavieFlow::new(Arc::new(SinField), line_driver(4), Arc::new(LinearControl::unit(1.0)), 1.0).unwrap();
        flow.apply(0.0, 0.3, &array![0.0]);
    }

    #[test]
    fn check_partition_reports_off_grid() {
        let flow = DavieFlow::new(Arc::new(SinField), line_driver(4), Arc::new(LinearControl::unit(1.0)), 1.0).unwrap();
        assert!(check_partition(&flow, &Partition::uniform(2, 1.0).unwrap()).is_ok());
        assert!(matches!(
            check_partition(&flow, &Partition::uniform(3, 1.0).unwrap()),
            Err(SewingError::OffGrid(_))
        ));
    }

    #[test]
    fn euler_budget_and_closed_form() {
        let x = line_driver(4);
        assert!(matches!(
            EulerYoungFlow::new(Arc::new(SinField), x.clone(), 0.5, 1.0),
            Err(SewingError::RegularityBudget(_))
        ));
        let flow = EulerYoungFlow::new(Arc::new(AffineField::scalar(1.0)), x, 1.0, 2.0).unwrap();
        assert!((flow.apply(0.25, 0.75, &array![2.0])[0] - 3.0).abs() < 1e-15);
        let env = flow.envelope();
        // |f| <= R on the ball, |x|_1 = 1: delta(h) = R h, M = |Df| R
        assert!((env.delta.eval(0.5) - 1.0).abs() < 1e-12);
        assert!((env.m - 2.0).abs() < 1e-12);
    }

    #[test]
    fn davie_envelope_dominates_increments() {
        let x = exact_line_driver(16);
        let flow = DavieFlow::new(
            Arc::new(RoughField::new(0.5, 1.0, 1).unwrap()),
            x,
            Arc::new(LinearControl::unit(1.0)),
            2.0,
        )
        .unwrap();
        let env = flow.envelope();
        let pts = flow.path().grid().points().to_vec();
        for (i, &s) in pts.iter().enumerate() {
            for &t in &pts[i..] {
                for &a in &[-2.0, -0.1, 0.0, 0.7, 2.0] {
                    let inc = norm(&increment(&flow, s, t, &array![a]));
                    assert!(inc <= env.delta.eval(t - s) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn perturbed_envelope_rule() {
        let env = Envelope::new(DeltaFunction::power_sum(vec![(1.0, 0.5)]), 2.0);
        let p = env.perturbed(0.1, 0.2);
        assert!((p.delta.eval(0.25) - 0.55).abs() < 1e-12);
        assert!((p.m - (2.0 + 2.2 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn linear_ode_flow_is_exact() {
        let flow = FnFlow::linear_ode(1.0, 1, 1.0, 1.0);
        let d = defect_at(&flow, 0.1, 0.4, 0.9, &array![1.3]);
        assert!(d[0].abs() < 1e-15);
    }
}
