use std::sync::Arc;

use ndarray::{array, Array1};
use sewing_core::control::{Control, LinearControl, PowerRemainder, Remainder};
use sewing_core::diagnostics::{d_a, defect, delta_excess, four_point, perturbation_norm, QuadSampler, TripleSampler};
use sewing_core::drivers::{DriverSource, EbmDriver, LineDriver, Weierstrass};
use sewing_core::field::{AffineField, ConstantField, SinField};
use sewing_core::flow::{defect_at, AlmostFlow, DavieFlow, EulerYoungFlow, SharedFlow};
use sewing_core::partition::Partition;
use sewing_core::perturb::{ConstantDirection, PerturbedFlow, Quantization, Rounding, ZeroPerturbation};
use sewing_core::registry::fields;
use sewing_core::rough_path::GridRoughPath;
use sewing_core::sewing::run_scheme;

fn line(n: usize, horizon: f64) -> Arc<GridRoughPath> {
    Arc::new(LineDriver { dim: 1 }.build(&Partition::uniform(n, horizon).unwrap(), 0).unwrap())
}

fn unit(horizon: f64) -> (Arc<dyn Control>, Arc<dyn Remainder>) {
    (Arc::new(LinearControl::unit(horizon)), Arc::new(PowerRemainder::new(1.5)))
}

#[test]
fn zero_field_gives_the_identity() {
    let x = line(8, 1.0);
    let (omega, _) = unit(1.0);
    let flow = DavieFlow::new(fields().build("zero").unwrap(), x.clone(), omega, 2.0).unwrap();
    let a = array![0.42];
    for (s, t) in [(0.0, 1.0), (0.25, 0.5), (0.5, 0.5)] {
        assert_eq!(flow.apply(s, t, &a), a);
    }
    let y = run_scheme(&flow, x.grid(), &a, None).unwrap();
    assert!(y.values.iter().all(|v| v == &a));
}

#[test]
fn linear_davie_defect_by_hand() {
    // phi_{t,s}(a) = a (1 + h + h^2 / 2) along x_t = t
    let x = line(2, 1.0);
    let (omega, _) = unit(1.0);
    let flow = DavieFlow::new(Arc::new(AffineField::scalar(1.0)), x, omega, 4.0).unwrap();
    let a = array![2.0];
    let half = 1.0 + 0.5 + 0.125;
    assert!((flow.apply(0.0, 0.5, &a)[0] - 2.0 * half).abs() < 1e-15);
    let d = defect_at(&flow, 0.0, 0.5, 1.0, &a)[0];
    assert!((d - 2.0 * (half * half - 2.5)).abs() < 1e-14);
}

#[test]
fn euler_examples() {
    let x = line(64, 1.0);
    let c = EulerYoungFlow::new(Arc::new(ConstantField { value: array![[0.7]] }), x.clone(), 1.0, 4.0).unwrap();
    let a = array![0.1];
    // constant fields make the first-order flow exact: only rounding remains
    let (omega, varpi) = unit(1.0);
    let rep = defect(&c, omega.as_ref(), varpi.as_ref(), &TripleSampler::for_flow(&c, 1.0, 500, 1));
    assert!(rep.m_hat < 1e-12, "{}", rep.m_hat);

    let lin = EulerYoungFlow::new(Arc::new(AffineField::scalar(1.0)), x.clone(), 1.0, 4.0).unwrap();
    assert!((lin.apply(0.25, 0.75, &a)[0] - 0.1 * 1.5).abs() < 1e-15);
    let y = run_scheme(&lin, x.grid(), &array![1.0], None).unwrap();
    let compound = (1.0 + 1.0 / 64.0f64).powi(64);
    assert!((y.last()[0] - compound).abs() < 1e-12);
}

#[test]
fn euler_on_weierstrass_driver_has_finite_defect() {
    let grid = Partition::dyadic(8, 1.0).unwrap();
    let x = Arc::new(Weierstrass { alpha: 0.75, terms: 16, dim: 1, sub: 2 }.build(&grid, 0).unwrap());
    let flow = EulerYoungFlow::new(Arc::new(SinField), x, 0.75, 4.0).unwrap();
    let omega = LinearControl::unit(1.0);
    let varpi = PowerRemainder::new(flow.remainder_exponent());
    assert!((flow.remainder_exponent() - 1.5).abs() < 1e-15);
    let rep = defect(&flow, &omega, &varpi, &TripleSampler::for_flow(&flow, 2.0, 2000, 3));
    assert!(rep.m_hat.is_finite() && rep.m_hat > 0.0);
    assert!(rep.m_hat <= flow.envelope().m, "{} > {}", rep.m_hat, flow.envelope().m);
    assert!(delta_excess(&flow, &TripleSampler::for_flow(&flow, 2.0, 500, 4)) <= 1e-12);
}

#[test]
fn defect_of_trivial_flows_is_zero() {
    let grid = Partition::dyadic(6, 1.0).unwrap();
    let x = Arc::new(EbmDriver { dim: 2, sub: 4, p: 2.2 }.build(&grid, 4).unwrap());
    let omega: Arc<dyn Control> = Arc::new(x.pvar_control());
    let varpi = PowerRemainder::davie(1.0, 2.2);
    for spec in ["constant:c=0.3:dim=2:noise=2", "zero:dim=2:noise=2"] {
        let flow = DavieFlow::new(fields().build(spec).unwrap(), x.clone(), omega.clone(), 2.0).unwrap();
        let rep = defect(&flow, omega.as_ref(), &varpi, &TripleSampler::for_flow(&flow, 2.0, 800, 5));
        assert!(rep.m_hat < 1e-13, "{spec}: {}", rep.m_hat);
    }
}

#[test]
fn distance_to_itself_is_zero() {
    let x = line(32, 1.0);
    let (omega, varpi) = unit(1.0);
    let flow = DavieFlow::new(Arc::new(SinField), x, omega.clone(), 2.0).unwrap();
    let rep = d_a(&flow, &flow, omega.as_ref(), varpi.as_ref(), &TripleSampler::for_flow(&flow, 2.0, 400, 6));
    assert_eq!(rep.value, 0.0);
}

#[test]
fn constant_direction_shift_is_measured_directly() {
    let x = line(32, 1.0);
    let (omega, varpi) = unit(1.0);
    let base: SharedFlow = Arc::new(DavieFlow::new(Arc::new(ConstantField { value: array![[1.0]] }), x, omega.clone(), 2.0).unwrap());
    let eta = 0.2;
    let eps = Arc::new(ConstantDirection::new(eta, array![-3.0], omega.clone(), varpi.clone()).unwrap());
    let psi = PerturbedFlow::new(base.clone(), eps.clone()).unwrap();
    let sampler = TripleSampler::for_flow(base.as_ref(), 2.0, 600, 7);
    let rep = d_a(base.as_ref(), &psi, omega.as_ref(), varpi.as_ref(), &sampler);
    let widest = sampler.triples().iter().map(|tr| tr.t - tr.r).fold(0.0, f64::max);
    assert!((rep.d_inf - eta * varpi.eval(widest)).abs() < 1e-12);
    assert!(rep.class_o < 1e-12);
    // the defect difference is eta (varpi(r,s) + varpi(s,t) - varpi(r,t)), at most eta
    assert!(rep.defect_diff <= eta + 1e-12);
    let pn = perturbation_norm(eps.as_ref(), base.as_ref(), omega.as_ref(), varpi.as_ref(), &sampler);
    assert!((pn.sup_part - eta).abs() < 1e-12);
}

#[test]
fn mollified_flows_approach_the_rough_flow() {
    let grid = Partition::dyadic(7, 1.0).unwrap();
    let x = Arc::new(EbmDriver { dim: 1, sub: 1, p: 2.2 }.build(&grid, 13).unwrap());
    let omega: Arc<dyn Control> = Arc::new(x.pvar_control());
    let phi = DavieFlow::new(fields().build("rough:gamma=0.5").unwrap(), x.clone(), omega.clone(), 2.0).unwrap();
    let varpi = PowerRemainder::new(phi.remainder_exponent());
    let sampler = TripleSampler::for_flow(&phi, 2.0, 1500, 17);
    let dists: Vec<f64> = [1, 3, 5]
        .iter()
        .map(|k| {
            let g = fields().build(&format!("rough:gamma=0.5:mollify=2^-{k}")).unwrap();
            let psi = DavieFlow::new(g, x.clone(), omega.clone(), 2.0).unwrap();
            d_a(&phi, &psi, omega.as_ref(), &varpi, &sampler).value
        })
        .collect();
    assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
}

#[test]
fn affine_flow_has_no_second_order_four_point_part() {
    let x = line(16, 0.5);
    let (omega, varpi) = unit(0.5);
    let flow = DavieFlow::new(Arc::new(AffineField::scalar(-1.0)), x, omega.clone(), 3.0).unwrap();
    let rep = four_point(&flow, omega.as_ref(), varpi.as_ref(), &QuadSampler::new(TripleSampler::for_flow(&flow, 3.0, 1500, 2)));
    assert!(rep.second_order < 1e-9, "{}", rep.second_order);
    assert!(rep.profile.iter().all(|p| p.1 < 1e-9));
}

#[test]
fn perturbation_envelopes() {
    let x = line(16, 1.0);
    let (omega, varpi) = unit(1.0);
    let base: SharedFlow = Arc::new(DavieFlow::new(Arc::new(SinField), x, omega.clone(), 2.0).unwrap());
    let same = PerturbedFlow::new(base.clone(), Arc::new(ZeroPerturbation)).unwrap();
    let a = array![0.3];
    assert_eq!(same.apply(0.125, 0.75, &a), base.apply(0.125, 0.75, &a));

    let q = Quantization::new(24, Rounding::Nearest).unwrap();
    let sampler = TripleSampler::for_flow(base.as_ref(), 2.0, 1000, 9);
    let pn = perturbation_norm(&q, base.as_ref(), omega.as_ref(), varpi.as_ref(), &sampler);
    assert!(pn.eta > 0.0 && pn.eta.is_finite());
    let psi = PerturbedFlow::with_eta(base.clone(), Arc::new(q), pn.eta);
    let (e0, e1) = (base.envelope(), psi.envelope());
    let delta_t = e0.delta.eval(1.0);
    assert!((e1.m - (e0.m + (2.0 + delta_t) * pn.eta)).abs() < 1e-12);
    assert!((e1.delta.eval(0.5) - e0.delta.eval(0.5) * (1.0 + pn.eta)).abs() < 1e-12);
    let moved: Array1<f64> = psi.apply(0.0, 1.0, &a) - base.apply(0.0, 1.0, &a);
    assert!(moved[0].abs() <= q.step() / 2.0);
}
