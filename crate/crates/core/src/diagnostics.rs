//! Sampled constants of almost flows: defect `M`, class-O seminorms, `d_A`,
//! the 4-point control and perturbation norms.
//!
//! Every constant here is a supremum over a declared, seeded sample set.

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{Control, Remainder};
use crate::flow::{defect_at, norm, AlmostFlow};
use crate::perturb::Perturbation;
use crate::rng::{CounterRng, Cursor};

/// Default probe multipliers `L` for class-O estimates.
pub fn default_l_grid() -> Vec<f64> {
    (-12..=6).map(|k| 2f64.powi(k)).collect()
}

/// Draws `(r, s, t, a)` with `r <= s <= t` among `times` and `a` in the working ball.
///
/// The span `t - r` is log-uniform in grid steps so that both local and
/// global triples are represented.
#[derive(Clone, Debug)]
pub struct TripleSampler {
    pub times: Vec<f64>,
    pub region: f64,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
    pub l_grid: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Triple {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub a: Array1<f64>,
    /// unit direction for probes
    pub u: Array1<f64>,
    /// a uniform number in (0, 1) for probe distances
    pub frac: f64,
    /// probe multiplier from the `L` grid
    pub l: f64,
}

impl TripleSampler {
    pub fn new(times: Vec<f64>, dim: usize, region: f64, count: usize, seed: u64) -> Self {
        Self {
            times,
            region,
            dim,
            count,
            seed,
            l_grid: default_l_grid(),
        }
    }

    /// Sample over the flow's own nodes, or 65 even times when it has none.
    pub fn for_flow(flow: &dyn AlmostFlow, region: f64, count: usize, seed: u64) -> Self {
        let times = match flow.nodes() {
            Some(p) => p.points().to_vec(),
            None => (0..=64).map(|k| flow.horizon() * k as f64 / 64.0).collect(),
        };
        Self::new(times, flow.dim(), region, count, seed)
    }

    fn pick(&self, cur: &mut Cursor) -> (usize, usize, usize) {
        let n = self.times.len() - 1;
        let width = (cur.range(0.0, ((n + 1) as f64).ln()).exp() as usize).clamp(1, n);
        let r = cur.index(n - width + 1);
        let t = r + width;
        let s = r + cur.index(width + 1);
        (r, s, t)
    }

    pub fn triples(&self) -> Vec<Triple> {
        let mut cur = CounterRng::new(self.seed).cursor();
        if self.times.len() < 2 {
            return Vec::new();
        }
        (0..self.count)
            .map(|k| {
                let (r, s, t) = self.pick(&mut cur);
                let a = Array1::from(cur.ball(self.dim, self.region));
                let u = Array1::from(cur.unit(self.dim));
                let frac = cur.uniform();
                let l = self.l_grid[k % self.l_grid.len()];
                Triple {
                    r: self.times[r],
                    s: self.times[s],
                    t: self.times[t],
                    a,
                    u,
                    frac,
                    l,
                }
            })
            .collect()
    }
}

fn argmax<T: Clone>(items: &[(f64, T)]) -> (f64, Option<T>) {
    let mut best = (0.0, None);
    for (v, item) in items {
        if *v > best.0 {
            best = (*v, Some(item.clone()));
        }
    }
    best
}

/// Sampled class-O constant of `chi`: the sup of
/// `|chi_{t,s}(a) - chi_{t,s}(b)| / (delta_T (1 + L) varpi(omega_{r,t}))`
/// over probes `|a - b| <= L varpi(omega_{r,s})`.
pub fn class_o_norm(
    chi: &(dyn Fn(f64, f64, &Array1<f64>) -> Array1<f64> + Sync),
    delta_t: f64,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    triples: &[Triple],
) -> f64 {
    if delta_t <= 0.0 {
        return 0.0;
    }
    triples
        .par_iter()
        .map(|tr| {
            let reach = varpi.eval(omega.eval(tr.r, tr.s));
            let denom = delta_t * (1.0 + tr.l) * varpi.eval(omega.eval(tr.r, tr.t));
            if reach == 0.0 || denom == 0.0 {
                return 0.0;
            }
            let b = &tr.a + &(&tr.u * (tr.l * reach * tr.frac));
            norm(&(chi(tr.s, tr.t, &tr.a) - chi(tr.s, tr.t, &b))) / denom
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstTriple {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub a: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    /// `sup |d phi_{t,s,r}(a)| / varpi(omega_{r,t})`
    pub m_hat: f64,
    pub worst_triple: Option<WorstTriple>,
    /// class-O constant of `hat phi` with the flow's own `delta_T`
    pub osc_constant: f64,
    /// `sup |d phi(a) - d phi(b)| / (|a - b| varpi(omega_{r,t}))`
    pub lip_over_varpi: f64,
    pub delta_t: f64,
    pub samples: usize,
    pub seed: u64,
    /// triples with `varpi(omega_{r,t}) = 0` but a nonzero defect
    pub zero_remainder_flags: usize,
}

pub fn defect(flow: &dyn AlmostFlow, omega: &dyn Control, varpi: &dyn Remainder, sampler: &TripleSampler) -> DefectReport {
    let triples = sampler.triples();
    let delta_t = flow.envelope().delta.eval(flow.horizon());
    let rows: Vec<(f64, f64, bool, WorstTriple)> = triples
        .par_iter()
        .map(|tr| {
            let d = defect_at(flow, tr.r, tr.s, tr.t, &tr.a);
            let w = varpi.eval(omega.eval(tr.r, tr.t));
            let size = norm(&d);
            let worst = WorstTriple {
                r: tr.r,
                s: tr.s,
                t: tr.t,
                a: tr.a.to_vec(),
            };
            if w == 0.0 {
                return (0.0, 0.0, size > 0.0, worst);
            }
            let sep = sampler.region * 10f64.powf(-4.0 * tr.frac);
            let b = &tr.a + &(&tr.u * sep);
            let db = defect_at(flow, tr.r, tr.s, tr.t, &b);
            (size / w, norm(&(&d - &db)) / (sep * w), false, worst)
        })
        .collect();
    let (m_hat, worst_triple) = argmax(&rows.iter().map(|r| (r.0, r.3.clone())).collect::<Vec<_>>());
    let hat = |s: f64, t: f64, a: &Array1<f64>| flow.apply(s, t, a) - a;
    DefectReport {
        m_hat,
        worst_triple,
        osc_constant: class_o_norm(&hat, delta_t, omega, varpi, &triples),
        lip_over_varpi: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        delta_t,
        samples: triples.len(),
        seed: sampler.seed,
        zero_remainder_flags: rows.iter().filter(|r| r.2).count(),
    }
}

/// Sampled `sup |hat phi_{t,s}(a)| - delta(t - s)` over the sampler's pairs; nonpositive when the envelope holds.
pub fn delta_excess(flow: &dyn AlmostFlow, sampler: &TripleSampler) -> f64 {
    let env = flow.envelope();
    sampler
        .triples()
        .par_iter()
        .map(|tr| {
            [(tr.r, tr.t), (tr.r, tr.s), (tr.s, tr.t)]
                .iter()
                .map(|&(s, t)| norm(&(flow.apply(s, t, &tr.a) - &tr.a)) - env.delta.eval(t - s))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub d_inf: f64,
    pub class_o: f64,
    pub defect_diff: f64,
    /// `max(d_inf, class_o, defect_diff)`
    pub value: f64,
    pub delta_t: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Sampled `d_A(phi, psi)`; `delta_T` for the class-O part is the larger of the two envelopes.
pub fn d_a(
    phi: &dyn AlmostFlow,
    psi: &dyn AlmostFlow,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    sampler: &TripleSampler,
) -> DistanceReport {
    let triples = sampler.triples();
    let horizon = phi.horizon();
    let delta_t = phi
        .envelope()
        .delta
        .eval(horizon)
        .max(psi.envelope().delta.eval(horizon));
    let rows: Vec<(f64, f64)> = triples
        .par_iter()
        .map(|tr| {
            let d_inf = [(tr.r, tr.t), (tr.r, tr.s), (tr.s, tr.t)]
                .iter()
                .map(|&(s, t)| norm(&(phi.apply(s, t, &tr.a) - psi.apply(s, t, &tr.a))))
                .fold(0.0, f64::max);
            let w = varpi.eval(omega.eval(tr.r, tr.t));
            let dd = if w > 0.0 {
                norm(&(defect_at(phi, tr.r, tr.s, tr.t, &tr.a) - defect_at(psi, tr.r, tr.s, tr.t, &tr.a))) / w
            } else {
                0.0
            };
            (d_inf, dd)
        })
        .collect();
    let diff = |s: f64, t: f64, a: &Array1<f64>| phi.apply(s, t, a) - psi.apply(s, t, a);
    let class_o = class_o_norm(&diff, delta_t, omega, varpi, &triples);
    let d_inf = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let defect_diff = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    DistanceReport {
        d_inf,
        class_o,
        defect_diff,
        value: d_inf.max(class_o).max(defect_diff),
        delta_t,
        samples: triples.len(),
        seed: sampler.seed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationNorm {
    /// `sup |eps_{t,s}(a)| / varpi(omega_{s,t})`
    pub sup_part: f64,
    /// class-O constant of `eps`
    pub osc_part: f64,
    /// `||eps||_E`, the larger of the two
    pub eta: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Sampled `||eps||_E` for a perturbation of `flow`.
pub fn perturbation_norm(
    eps: &dyn Perturbation,
    flow: &dyn AlmostFlow,
    omega: &dyn Control,
    varpi: &dyn Remainder,
    sampler: &TripleSampler,
) -> PerturbationNorm {
    let triples = sampler.triples();
    let delta_t = flow.envelope().delta.eval(flow.horizon());
    let e = |s: f64, t: f64, a: &Array1<f64>| eps.eval(s, t, a, &flow.apply(s, t, a));
    let sup_part = triples
        .par_iter()
        .map(|tr| {
            [(tr.r, tr.t), (tr.r, tr.s), (tr.s, tr.t)]
                .iter()
                .map(|&(s, t)| {
                    let w = varpi.eval(omega.eval(s, t));
                    if w > 0.0 {
                        norm(&e(s, t, &tr.a)) / w
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let osc_part = class_o_norm(&e, delta_t, omega, varpi, &triples);
    PerturbationNorm {
        sup_part,
        osc_part,
        eta: sup_part.max(osc_part),
        samples: triples.len(),
        seed: sampler.seed,
    }
}

/// Quadruples `(a, b, c, d)` for the 4-point control: `|a - b|` is tied to
/// `alpha varpi(omega_{r,s})` for `alpha` on a grid, `|a - c|` is log-uniform, and
/// `d = b + c - a + w` with `w` zero half of the time and small otherwise.
#[derive(Clone, Debug)]
pub struct QuadSampler {
    pub triples: TripleSampler,
    pub alpha_grid: Vec<f64>,
}

impl QuadSampler {
    pub fn new(triples: TripleSampler) -> Self {
        Self {
            triples,
            alpha_grid: (-4..=8).map(|k| 2f64.powi(k)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourPointReport {
    /// sampled constant in front of `|a - b - c + d|` (compare with `1 + delta_T`)
    pub lip_excess: f64,
    pub delta_t: f64,
    /// `(alpha, phi_star(alpha))`
    pub phi_star: Vec<(f64, f64)>,
    /// `(upper edge of |a-b| v |c-d| bin, check phi)`
    pub profile: Vec<(f64, f64)>,
    /// `sup (S - lip_excess W)_+ / (|a-b| v |c-d|)(|a-c| v |b-d|)`: bounded for `C^2`
    /// fields, grows near points where the derivative is only Hoelder
    pub second_order: f64,
    pub samples: usize,
    pub seed: u64,
}

impl FourPointReport {
    /// Conservative read-out: the value at the smallest grid `alpha >= x`,
    /// or linear growth beyond the grid.
    pub fn phi_star_at(&self, x: f64) -> f64 {
        for &(alpha, v) in &self.phi_star {
            if alpha >= x {
                return v;
            }
        }
        self.phi_star
            .last()
            .map_or(0.0, |&(alpha, v)| v * (x / alpha).max(1.0))
    }
}

struct Quad {
    s: f64,
    t: f64,
    w_rt: f64,
    alpha_idx: usize,
    pts: [Array1<f64>; 4],
    /// `a - b - c + d` as constructed, free of cancellation
    second: Array1<f64>,
}

pub fn four_point(flow: &dyn AlmostFlow, omega: &dyn Control, varpi: &dyn Remainder, sampler: &QuadSampler) -> FourPointReport {
    let ts = &sampler.triples;
    let mut cur = CounterRng::new(ts.seed).substream(4).cursor();
    let quads: Vec<Quad> = ts
        .triples()
        .into_iter()
        .enumerate()
        .filter_map(|(k, tr)| {
            let reach = varpi.eval(omega.eval(tr.r, tr.s));
            let w_rt = varpi.eval(omega.eval(tr.r, tr.t));
            let alpha_idx = k % sampler.alpha_grid.len();
            let u = sampler.alpha_grid[alpha_idx] * reach * cur.uniform();
            let v = ts.region * 10f64.powf(-3.0 * cur.uniform());
            let wmag = if cur.uniform() < 0.5 { 0.0 } else { v * 10f64.powf(-1.0 - 3.0 * cur.uniform()) };
            let (e1, e2, e3) = (
                Array1::from(cur.unit(ts.dim)),
                Array1::from(cur.unit(ts.dim)),
                Array1::from(cur.unit(ts.dim)),
            );
            if u == 0.0 || w_rt == 0.0 {
                return None;
            }
            let a = tr.a.clone();
            let b = &a + &(&e1 * u);
            let c = &a + &(&e2 * v);
            let second = &e3 * wmag;
            let d = &b + &c - &a + &second;
            Some(Quad {
                second,
                s: tr.s,
                t: tr.t,
                w_rt,
                alpha_idx,
                pts: [a, b, c, d],
            })
        })
        .collect();
    // second difference (less its rounding floor), W, U, V, and two-point Lipschitz quotients
    let rows: Vec<(f64, f64, f64, f64, f64)> = quads
        .par_iter()
        .map(|q| {
            let [a, b, c, d] = &q.pts;
            let img: Vec<Array1<f64>> = q.pts.iter().map(|p| flow.apply(q.s, q.t, p)).collect();
            let floor = 8.0 * f64::EPSILON * img.iter().map(norm).sum::<f64>();
            let s_val = (norm(&(&img[0] - &img[1] - &img[2] + &img[3])) - floor).max(0.0);
            let wv = &q.second;
            let w = norm(wv);
            let u = norm(&(a - b)).max(norm(&(c - d)));
            let v = norm(&(a - c)).max(norm(&(b - d)));
            let mut lip = 0.0f64;
            for (x, fx) in [(b, &img[1]), (c, &img[2])] {
                let sep = norm(&(a - x));
                if sep > 0.0 {
                    lip = lip.max(norm(&(&img[0] - fx)) / sep);
                }
            }
            if w > 0.0 {
                let shifted = flow.apply(q.s, q.t, &(a + wv));
                lip = lip.max(norm(&(shifted - &img[0])) / w);
            }
            (s_val, w, u, v, lip)
        })
        .collect();
    let lip_excess = rows.iter().map(|r| r.4).fold(0.0, f64::max);
    let mut phi_star = vec![0.0f64; sampler.alpha_grid.len()];
    let mut bins: std::collections::BTreeMap<i32, f64> = std::collections::BTreeMap::new();
    let mut second_order = 0.0f64;
    for (q, &(s_val, w, u, v, _)) in quads.iter().zip(&rows) {
        let excess = (s_val - lip_excess * w).max(0.0);
        let check = excess / v;
        phi_star[q.alpha_idx] = phi_star[q.alpha_idx].max(check / q.w_rt);
        let bin = u.log2().ceil() as i32;
        let e = bins.entry(bin).or_insert(0.0);
        *e = e.max(check);
        second_order = second_order.max(excess / (u * v));
    }
    // phi_star is nondecreasing in alpha
    for k in 1..phi_star.len() {
        phi_star[k] = phi_star[k].max(phi_star[k - 1]);
    }
    let mut profile: Vec<(f64, f64)> = bins.into_iter().map(|(b, v)| (2f64.powi(b), v)).collect();
    for k in 1..profile.len() {
        profile[k].1 = profile[k].1.max(profile[k - 1].1);
    }
    FourPointReport {
        lip_excess,
        delta_t: flow.envelope().delta.eval(flow.horizon()),
        phi_star: sampler.alpha_grid.iter().copied().zip(phi_star).collect(),
        profile,
        second_order,
        samples: quads.len(),
        seed: ts.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{LinearControl, PowerRemainder};
    use crate::field::{AffineField, ConstantField, RoughField, SinField};
    use crate::flow::{DavieFlow, Envelope, FnFlow};
    use crate::partition::Partition;
    use crate::perturb::{ConstantDirection, PerturbedFlow};
    use crate::rough_path::{lift_function, GridRoughPath, RoughIncrement};
    use crate::control::DeltaFunction;
    use ndarray::array;
    use std::sync::Arc;

    fn exact_line_driver(n: usize) -> Arc<GridRoughPath> {
        let grid = Partition::uniform(n, 1.0).unwrap();
        let incs = grid
            .points()
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                RoughIncrement::new(array![h], array![[h * h / 2.0]]).unwrap()
            })
            .collect();
        Arc::new(GridRoughPath::from_increments(grid, incs, 2.0).unwrap())
    }

    fn unit() -> (LinearControl, PowerRemainder) {
        (LinearControl::unit(1.0), PowerRemainder::new(1.5))
    }

    #[test]
    fn constant_and_zero_fields_have_no_defect() {
        let (omega, varpi) = unit();
        let x = exact_line_driver(16);
        for c in [0.0, 1.7] {
            let flow = DavieFlow::new(
                Arc::new(ConstantField { value: array![[c]] }),
                x.clone(),
                Arc::new(omega),
                1.0,
            )
            .unwrap();
            let rep = defect(&flow, &omega, &varpi, &TripleSampler::for_flow(&flow, 1.0, 500, 1));
            // the first levels telescope; only rounding of the prefix sums remains
            assert!(rep.m_hat <= 1e-12);
            assert_eq!(rep.zero_remainder_flags, 0);
        }
    }

    #[test]
    fn linear_davie_defect_matches_symbolic_sup() {
        let (omega, varpi) = unit();
        let x = exact_line_driver(8);
        let flow = DavieFlow::new(Arc::new(AffineField::scalar(1.0)), x, Arc::new(omega), 1.0).unwrap();
        let sampler = TripleSampler::for_flow(&flow, 1.0, 400, 3);
        let rep = defect(&flow, &omega, &varpi, &sampler);
        let g = |h: f64| 1.0 + h + h * h / 2.0;
        let oracle = sampler
            .triples()
            .iter()
            .filter(|tr| tr.t > tr.r)
            .map(|tr| {
                let sym = tr.a[0] * (g(tr.s - tr.r) * g(tr.t - tr.s) - g(tr.t - tr.r));
                sym.abs() / (tr.t - tr.r).powf(1.5)
            })
            .fold(0.0, f64::max);
        assert!((rep.m_hat - oracle).abs() < 1e-12);
        assert!(rep.m_hat > 0.0);
    }

    #[test]
    fn d_a_is_a_semimetric_on_samples() {
        let (omega, varpi) = unit();
        let x = exact_line_driver(16);
        let make = |c: f64| -> Arc<dyn AlmostFlow> {
            Arc::new(DavieFlow::new(Arc::new(AffineField::scalar(c)), x.clone(), Arc::new(omega), 1.0).unwrap())
        };
        let (f, g, h) = (make(1.0), make(1.2), make(0.7));
        let s = TripleSampler::for_flow(f.as_ref(), 1.0, 300, 5);
        assert_eq!(d_a(f.as_ref(), f.as_ref(), &omega, &varpi, &s).value, 0.0);
        let fg = d_a(f.as_ref(), g.as_ref(), &omega, &varpi, &s);
        let gf = d_a(g.as_ref(), f.as_ref(), &omega, &varpi, &s);
        assert_eq!(fg.value, gf.value);
        let fh = d_a(f.as_ref(), h.as_ref(), &omega, &varpi, &s).value;
        let hg = d_a(h.as_ref(), g.as_ref(), &omega, &varpi, &s).value;
        assert!(fg.value <= fh + hg + 1e-12);
    }

    #[test]
    fn constant_direction_shift_distance() {
        let (omega, varpi) = unit();
        let base: Arc<dyn AlmostFlow> = Arc::new(FnFlow::linear_ode(1.0, 1, 1.0, 1.0));
        let eta = 0.25;
        let eps = ConstantDirection::new(eta, array![1.0], Arc::new(omega), Arc::new(varpi)).unwrap();
        let psi = PerturbedFlow::new(base.clone(), Arc::new(eps)).unwrap();
        let s = TripleSampler::for_flow(base.as_ref(), 1.0, 500, 2);
        let rep = d_a(base.as_ref(), &psi, &omega, &varpi, &s);
        // direct evaluation: the shift is eta varpi(t - s), largest on the widest sampled pair
        let widest = s.triples().iter().map(|tr| tr.t - tr.r).fold(0.0, f64::max);
        assert!((rep.d_inf - eta * widest.powf(1.5)).abs() < 1e-12);
        assert!(rep.class_o < 1e-12);
    }

    #[test]
    fn affine_four_point_has_no_second_order_part() {
        let (omega, varpi) = unit();
        let a_mat = array![[1.1, 0.3], [-0.2, 0.9]];
        let env = Envelope::new(DeltaFunction::zero(), 0.0);
        let flow = FnFlow::new("affine", 2, 1.0, env, move |s, t, a| {
            (a_mat.dot(a) * (1.0 + t - s)) + array![t - s, 0.5]
        });
        let q = QuadSampler::new(TripleSampler::for_flow(&flow, 2.0, 2000, 8));
        let rep = four_point(&flow, &omega, &varpi, &q);
        assert!(rep.profile.iter().all(|p| p.1 < 1e-12), "{:?}", rep.profile);
        assert!(rep.second_order < 1e-9);
        // largest singular value of 2 A bounds the sampled constant
        assert!(rep.lip_excess <= 2.0 * 1.25 && rep.lip_excess > 1.0, "{}", rep.lip_excess);
    }

    #[test]
    fn smooth_and_rough_four_point() {
        let (omega, varpi) = unit();
        let grid = Partition::uniform(16, 1.0).unwrap();
        let x = Arc::new(lift_function(|t| array![(3.0 * t).sin()], &grid, 32, 2.0).unwrap());
        let smooth = DavieFlow::new(Arc::new(SinField), x.clone(), Arc::new(omega), 1.0).unwrap();
        let rough = DavieFlow::new(Arc::new(RoughField::new(0.5, 1.0, 1).unwrap()), x, Arc::new(omega), 1.0).unwrap();
        let run = |f: &DavieFlow, n: usize| {
            four_point(f, &omega, &varpi, &QuadSampler::new(TripleSampler::for_flow(f, 1.0, n, 6))).second_order
        };
        let (s1, s2) = (run(&smooth, 500), run(&smooth, 5000));
        assert!(s1 < 10.0 && s2 < 10.0, "{s1} {s2}");
        let (r1, r2) = (run(&rough, 500), run(&rough, 5000));
        assert!(r2 >= r1 && r2 > 3.0 * s2, "{r1} {r2} {s2}");
    }
}
