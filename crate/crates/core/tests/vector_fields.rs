use std::sync::Arc;

use ndarray::{array, Array2};
use sewing_core::field::{
    estimate_holder, f2, sup_distance, AffineField, ConstantField, FnField, Mollified, PairSampler, RoughField, SharedField,
    SinField, VectorField,
};
use sewing_core::registry::fields;

#[test]
fn f2_examples() {
    let c = ConstantField { value: array![[1.0, 2.0], [3.0, 4.0]] };
    assert!(f2(&c, &array![0.5, -0.5]).unwrap().iter().all(|v| *v == 0.0));

    let id = AffineField::scalar(1.0);
    for a in [-2.0, 0.0, 0.37] {
        assert!((f2(&id, &array![a]).unwrap()[[0, 0, 0]] - a).abs() < 1e-15);
    }

    let a = 0.7f64;
    let h = 1e-5;
    let fd = ((a + h).sin() - (a - h).sin()) / (2.0 * h) * a.sin();
    let exact = f2(&SinField, &array![a]).unwrap()[[0, 0, 0]];
    assert!((exact - a.cos() * a.sin()).abs() < 1e-15);
    assert!((exact - fd).abs() < 1e-9);
}

#[test]
fn f2_needs_a_derivative() {
    let f = FnField::new("abs", 1, 1, 1.0, |a| array![[a[0].abs()]]);
    assert!(f2(&f, &array![0.2]).is_err());
}

#[test]
fn holder_of_linear_map_is_its_operator_norm() {
    let m: Array2<f64> = array![[2.0, 1.0], [0.0, 1.0]];
    let f = AffineField::from_matrix(&m).unwrap();
    let op = (3.0 + 5f64.sqrt()).sqrt();
    let rep = estimate_holder(&f, 0, 1.0, &PairSampler::new(2, 1.0, 5000, 3)).unwrap();
    assert!(rep.estimate <= op * (1.0 + 1e-12));
    assert!(rep.estimate > 0.98 * op);
}

#[test]
fn holder_of_constant_is_zero() {
    let c = ConstantField { value: array![[1.5]] };
    for lambda in [0.3, 1.0] {
        assert_eq!(estimate_holder(&c, 0, lambda, &PairSampler::new(1, 2.0, 200, 1)).unwrap().estimate, 0.0);
    }
    assert_eq!(estimate_holder(&c, 1, 0.5, &PairSampler::new(1, 2.0, 200, 1)).unwrap().estimate, 0.0);
}

#[test]
fn rough_derivative_is_holder_but_not_lipschitz() {
    let f = RoughField::new(0.5, 1.0, 1).unwrap();
    let mut holder = Vec::new();
    let mut lip = Vec::new();
    for min_scale in [1e-2, 1e-5, 1e-8] {
        let sampler = PairSampler { min_scale, ..PairSampler::new(1, 1.0, 4000, 12) };
        holder.push(estimate_holder(&f, 1, 0.5, &sampler).unwrap());
        lip.push(estimate_holder(&f, 1, 1.0, &sampler).unwrap().estimate);
    }
    assert!(holder.iter().all(|r| r.estimate.is_finite() && r.within_declared()));
    assert!(lip.windows(2).all(|w| w[1] > 3.0 * w[0]), "{lip:?}");
}

#[test]
fn mollifying_a_linear_field_changes_nothing() {
    let f = fields().build("linear:c=-1.3").unwrap();
    let g = fields().build("linear:c=-1.3:mollify=0.5").unwrap();
    assert!(sup_distance(f.as_ref(), g.as_ref(), 3.0, 200, 4) < 1e-13);
}

#[test]
fn mollified_absolute_value_at_origin() {
    let f: SharedField = Arc::new(FnField::new("abs", 1, 1, 1.0, |a| array![[a[0].abs()]]));
    for h in [0.5, 0.125, 2f64.powi(-6)] {
        let g = Mollified::new(f.clone(), h).unwrap();
        let expect = h * (2.0 / std::f64::consts::PI).sqrt();
        assert!((g.eval(&array![0.0])[[0, 0]] - expect).abs() < 1e-13);
    }
}

#[test]
fn mollified_rough_field_approaches_the_field() {
    let f = fields().build("rough:gamma=0.5").unwrap();
    let dists: Vec<f64> = (1..=6)
        .map(|k| {
            let g = fields().build(&format!("rough:gamma=0.5:mollify=2^-{k}")).unwrap();
            sup_distance(f.as_ref(), g.as_ref(), 2.0, 500, 8)
        })
        .collect();
    assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
    assert!(dists[5] < 0.05);
}

#[test]
fn unknown_field_keys_are_rejected() {
    assert!(fields().build("rough:gama=0.5").is_err());
    assert!(fields().build("nosuch").is_err());
    assert!(fields().build("rough:gamma=1.5").is_err());
}
