use std::sync::Arc;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sewing_core::control::{certify_kappa, log_grid, superadditivity_defect, LinearControl, PowerRemainder};
use sewing_core::diagnostics::{d_a, TripleSampler};
use sewing_core::drivers::{DriverSource, EbmDriver};
use sewing_core::flow::DavieFlow;
use sewing_core::partition::{Partition, Refinement};
use sewing_core::registry::fields;
use sewing_core::rough_path::{chen_combine, sample_ito_ebm, RoughIncrement};
use sewing_core::sewing::{fixed_point_defect, phi_pi, run_scheme};

fn increment(d: usize) -> impl Strategy<Value = RoughIncrement> {
    (prop::collection::vec(-2.0..2.0f64, d), prop::collection::vec(-2.0..2.0f64, d * d)).prop_map(move |(x1, x2)| {
        RoughIncrement::new(Array1::from(x1), Array2::from_shape_vec((d, d), x2).unwrap()).unwrap()
    })
}

fn triple(d: usize) -> impl Strategy<Value = (RoughIncrement, RoughIncrement, RoughIncrement)> {
    (increment(d), increment(d), increment(d))
}

fn close(a: &RoughIncrement, b: &RoughIncrement, tol: f64) -> bool {
    a.x1.iter().zip(&b.x1).chain(a.x2.iter().zip(&b.x2)).all(|(u, v)| (u - v).abs() <= tol)
}

const SCALAR_FIELDS: [&str; 4] = ["sin", "linear:c=-0.7", "rough:gamma=0.5", "rough:gamma=0.3:mollify=0.25"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chen_product_is_associative((a, b, c) in (1usize..4).prop_flat_map(triple)) {
        let left = chen_combine(&chen_combine(&a, &b).unwrap(), &c).unwrap();
        let right = chen_combine(&a, &chen_combine(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn sampled_paths_satisfy_chen(d in 1usize..4, level in 2u32..6, sub in 1usize..6, seed in any::<u64>()) {
        let grid = Partition::dyadic(level, 1.0).unwrap();
        let x = sample_ito_ebm(d, &grid, sub, seed, 2.3).unwrap();
        prop_assert!(x.chen_defect() <= 1e-12);
        let total = x.compose_range(0, grid.intervals());
        let folded = x.increments().iter().skip(1).fold(x.increments()[0].clone(), |acc, i| chen_combine(&acc, i).unwrap());
        prop_assert!(close(&total, &folded, 1e-12));
    }

    #[test]
    fn schemes_are_fixed_points_and_obey_chasles(
        field in prop::sample::select(SCALAR_FIELDS.to_vec()),
        level in 3u32..7,
        seed in 0u64..1000,
        a in -1.0..1.0f64,
        cut in (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64),
    ) {
        let grid = Partition::dyadic(level, 1.0).unwrap();
        let x = Arc::new(EbmDriver { dim: 1, sub: 1, p: 2.2 }.build(&grid, seed).unwrap());
        let flow = DavieFlow::new(fields().build(field).unwrap(), x.clone(), Arc::new(x.pvar_control()), 4.0).unwrap();
        let y = run_scheme(&flow, &grid, &Array1::from_elem(1, a), None).unwrap();
        prop_assert!(fixed_point_defect(&flow, &y).unwrap() <= 1e-12);
        let n = grid.len() - 1;
        let mut idx = [cut.0, cut.1, cut.2].map(|u| (u * n as f64) as usize);
        idx.sort();
        let [i, j, k] = idx;
        let ij = phi_pi(&flow, &grid, &y.values, i, j).unwrap();
        let jk = phi_pi(&flow, &grid, &y.values, j, k).unwrap();
        let ik = phi_pi(&flow, &grid, &y.values, i, k).unwrap();
        prop_assert!((&ij + &jk - &ik).iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn controls_are_superadditive(scale in 0.1..5.0f64, level in 2u32..6, seed in any::<u64>(), p in 2.0..3.0f64) {
        let grid = Partition::dyadic(level, 1.0).unwrap();
        let times: Vec<f64> = grid.points().to_vec();
        prop_assert!(superadditivity_defect(&LinearControl::new(scale, 1.0), &times) <= 0.0);
        let x = sample_ito_ebm(2, &grid, 2, seed, p).unwrap();
        // interior points too, where the grid control interpolates
        let mid: Vec<f64> = times.windows(2).flat_map(|w| [w[0], 0.3 * w[0] + 0.7 * w[1]]).collect();
        prop_assert!(superadditivity_defect(&x.pvar_control(), &mid) <= 0.0);
    }

    #[test]
    fn kappa_of_power_law_is_closed_form(theta in 1.01..4.0f64) {
        let grid = log_grid(1e-6, 1e3, 64).unwrap();
        let k = certify_kappa(&PowerRemainder::new(theta), &grid).unwrap();
        prop_assert!((k - 2f64.powf(1.0 - theta)).abs() <= 1e-12);
        prop_assert!(k < 1.0);
    }

    #[test]
    fn refinement_nests(level in 0u32..5, extra in prop::collection::vec(0.01..0.99f64, 0..4), rounds in 1u32..3) {
        let base = Partition::dyadic(level, 1.0).unwrap();
        let dyadic = base.refine(&Refinement::Dyadic(rounds)).unwrap();
        prop_assert!(base.is_nested_in(&dyadic));
        prop_assert_eq!(dyadic.intervals(), base.intervals() << rounds);
        let mids = base.refine(&Refinement::InsertMidpoints).unwrap();
        prop_assert!(base.is_nested_in(&mids) && mids.is_nested_in(&dyadic));
        let fresh: Vec<f64> = extra.into_iter().filter(|t| base.index_of(*t).is_none()).collect();
        if let Ok(custom) = base.refine(&Refinement::Custom(fresh)) {
            prop_assert!(base.is_nested_in(&custom));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distance_is_symmetric(f in prop::sample::select(SCALAR_FIELDS.to_vec()), g in prop::sample::select(SCALAR_FIELDS.to_vec()), seed in 0u64..100) {
        let grid = Partition::dyadic(4, 1.0).unwrap();
        let x = Arc::new(EbmDriver { dim: 1, sub: 1, p: 2.2 }.build(&grid, seed).unwrap());
        let omega = Arc::new(x.pvar_control());
        let phi = DavieFlow::new(fields().build(f).unwrap(), x.clone(), omega.clone(), 2.0).unwrap();
        let psi = DavieFlow::new(fields().build(g).unwrap(), x.clone(), omega.clone(), 2.0).unwrap();
        let varpi = PowerRemainder::new(phi.remainder_exponent().min(psi.remainder_exponent()));
        let sampler = TripleSampler::for_flow(&phi, 2.0, 200, seed);
        let ab = d_a(&phi, &psi, omega.as_ref(), &varpi, &sampler);
        let ba = d_a(&psi, &phi, omega.as_ref(), &varpi, &sampler);
        prop_assert_eq!(ab.value, ba.value);
        if f == g {
            prop_assert_eq!(ab.value, 0.0);
        }
    }
}
