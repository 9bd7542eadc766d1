//! Reduced observables `B(t)` from the dual cumulant expansion, its reduced
//! (binomial) form, and the direct conjugated group.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_point, mask_of, partitions_with_coefficients, SolverError, SubsetFlows};
use crate::dynamics::{DynamicsError, PathologyKind, PhasePoint};
use crate::functionals::{ObservableSeq, PhaseFn};
use crate::partition::{binomial, enumerate_injections, factorial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualRoute {
    /// Partition sums over cumulants, one term per subset of removed labels.
    Partition,
    /// Alternating binomial sums of nested groups over ordered injections.
    Reduced,
    /// `e^{-𝔞⁺} S(t) e^{𝔞⁺} B(0)` evaluated as composed sequence operators.
    Direct,
}

impl DualRoute {
    pub const ALL: [DualRoute; 3] = [DualRoute::Partition, DualRoute::Reduced, DualRoute::Direct];

    pub fn name(self) -> &'static str {
        match self {
            DualRoute::Partition => "partition",
            DualRoute::Reduced => "reduced",
            DualRoute::Direct => "direct",
        }
    }
}

#[derive(Clone)]
pub struct DualSolutionRequest {
    pub s: usize,
    pub t: f64,
    pub b0: ObservableSeq,
    pub points: Vec<Vec<PhasePoint>>,
}

fn bits(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// `𝔄_{1+n}(t, {C}, J) b(x_C)` by summing over partitions of `{C} ∪ J`.
pub(crate) fn dual_cumulant_value(
    flows: &SubsetFlows,
    c_mask: u32,
    j_mask: u32,
    b: &dyn Fn(&[PhasePoint]) -> f64,
    buf: &mut Vec<PhasePoint>,
) -> f64 {
    if c_mask == 0 {
        return if j_mask == 0 { b(&[]) } else { 0.0 };
    }
    let js = bits(j_mask);
    let mut total = 0.0;
    for (partition, coef) in partitions_with_coefficients(1 + js.len()) {
        let block = partition.iter().find(|blk| blk.contains(&0)).expect("some block holds the cluster");
        let mask = block.iter().filter(|&&e| e > 0).fold(c_mask, |m, &e| m | (1 << js[e - 1]));
        if flows.restrict(mask, c_mask, buf) {
            total += coef * b(buf);
        }
    }
    total
}

fn pathology_from_nan(v: f64, t: f64) -> Result<f64, SolverError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SolverError::Dynamics(DynamicsError::Pathology {
            kind: PathologyKind::CollisionCascade,
            time: t,
        }))
    }
}

/// `B_s(t, x)` through the partition route.
pub fn dual_partition(b0: &ObservableSeq, s: usize, t: f64, x: &[PhasePoint]) -> Result<f64, SolverError> {
    check_request(b0, s, x)?;
    let flows = SubsetFlows::all(x, b0.sigma(), t)?;
    let full = mask_of(0..s);
    let mut buf = Vec::with_capacity(s);
    let mut total = 0.0;
    // every proper subset J of removed labels; its complement is the cluster
    for j_mask in 0..full {
        let c_mask = full & !j_mask;
        let k = c_mask.count_ones() as usize;
        if b0.component(k).is_none() {
            continue;
        }
        total += dual_cumulant_value(&flows, c_mask, j_mask, &|y| b0.eval(k, y), &mut buf);
    }
    Ok(total)
}

/// `B_s(t, x)` through reduced cumulants over ordered injections with `1/n!`.
pub fn dual_reduced(b0: &ObservableSeq, s: usize, t: f64, x: &[PhasePoint]) -> Result<f64, SolverError> {
    check_request(b0, s, x)?;
    let flows = SubsetFlows::all(x, b0.sigma(), t)?;
    let full = mask_of(0..s);
    let mut buf = Vec::with_capacity(s);
    let mut total = 0.0;
    for n in 0..s {
        if b0.component(s - n).is_none() {
            continue;
        }
        let mut order = 0.0;
        for tuple in enumerate_injections(n, s) {
            let idx: Vec<usize> = tuple.iter().map(|l| l.0 as usize - 1).collect();
            let c_mask = full & !mask_of(idx.iter().copied());
            for k in 0..=n {
                let grown = c_mask | mask_of(idx[..n - k].iter().copied());
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                if flows.restrict(grown, c_mask, &mut buf) {
                    order += sign * binomial(n, k) as f64 * b0.eval(s - n, &buf);
                }
            }
        }
        total += order / factorial(n) as f64;
    }
    Ok(total)
}

/// The composed sequence `e^{-𝔞⁺} S(t) e^{𝔞⁺} B(0)`.
pub fn direct_sequence(b0: &ObservableSeq, t: f64) -> ObservableSeq {
    b0.exp_creation(1.0).evolve(t).reduce_observable()
}

/// `B_s(t, x)` by evaluating [`direct_sequence`].
pub fn dual_direct(b0: &ObservableSeq, s: usize, t: f64, x: &[PhasePoint]) -> Result<f64, SolverError> {
    check_request(b0, s, x)?;
    pathology_from_nan(direct_sequence(b0, t).eval(s, x), t)
}

pub fn dual_solution(b0: &ObservableSeq, s: usize, t: f64, x: &[PhasePoint], route: DualRoute) -> Result<f64, SolverError> {
    match route {
        DualRoute::Partition => dual_partition(b0, s, t, x),
        DualRoute::Reduced => dual_reduced(b0, s, t, x),
        DualRoute::Direct => dual_direct(b0, s, t, x),
    }
}

/// Values at every requested point; points are independent and run in parallel.
pub fn dual_solution_b(req: &DualSolutionRequest, route: DualRoute) -> Vec<Result<f64, SolverError>> {
    if route == DualRoute::Direct {
        let seq = direct_sequence(&req.b0, req.t);
        return req
            .points
            .par_iter()
            .map(|x| {
                check_request(&req.b0, req.s, x)?;
                pathology_from_nan(seq.eval(req.s, x), req.t)
            })
            .collect();
    }
    req.points
        .par_iter()
        .map(|x| dual_solution(&req.b0, req.s, req.t, x, route))
        .collect()
}

fn check_request(b0: &ObservableSeq, s: usize, x: &[PhasePoint]) -> Result<(), SolverError> {
    if s > b0.n_max() {
        return Err(SolverError::Truncation {
            needed: s,
            n_max: b0.n_max(),
        });
    }
    check_point(x, s, b0.sigma())
}

/// `𝔄_s(t, 1, …, s) Σ_j b₁(x_j)` for the additive observable `(0, b₁, 0, …)`.
pub fn dual_solution_additive(b1: &PhaseFn, sigma: f64, s: usize, t: f64, x: &[PhasePoint]) -> Result<f64, SolverError> {
    check_point(x, s, sigma)?;
    if s == 0 {
        return Ok(0.0);
    }
    let flows = SubsetFlows::all(x, sigma, t)?;
    let mut total = 0.0;
    for (partition, coef) in partitions_with_coefficients(s) {
        let mut sum = 0.0;
        for block in partition {
            let mask = mask_of(block.iter().copied());
            for &j in block {
                let y = flows.point_in(mask, j).expect("allowed point has allowed subsets");
                sum += b1(&[y]);
            }
        }
        total += coef * sum;
    }
    Ok(total)
}

/// `B_s^{(k)}(t)` for the k-ary observable with only component `k` non-zero:
/// zero below `k`, otherwise the `(1+s-k)`-th order cumulants summed over the
/// removed label sets.
pub fn dual_solution_kary(
    b_k: &PhaseFn,
    k: usize,
    sigma: f64,
    s: usize,
    t: f64,
    x: &[PhasePoint],
) -> Result<f64, SolverError> {
    check_point(x, s, sigma)?;
    if s < k {
        return Ok(0.0);
    }
    let flows = SubsetFlows::all(x, sigma, t)?;
    let full = mask_of(0..s);
    let mut buf = Vec::with_capacity(s);
    let b = |y: &[PhasePoint]| {
        if crate::dynamics::is_allowed(y, sigma) {
            b_k(y)
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for j_mask in crate::partition::subsets_of_size(s, s - k) {
        total += dual_cumulant_value(&flows, full & !j_mask, j_mask, &b, &mut buf);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::phase_fn;

    fn pt(q: [f64; 3], p: [f64; 3]) -> PhasePoint {
        PhasePoint::new(q, p)
    }

    fn head_on() -> Vec<PhasePoint> {
        vec![pt([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]), pt([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])]
    }

    #[test]
    fn first_component_is_transport() {
        let b1 = phase_fn(|x| x[0].q[0]);
        let b0 = ObservableSeq::zero(1.0, 3).with_component(1, b1);
        let x = [pt([0.0; 3], [2.0, 0.0, 0.0])];
        for route in DualRoute::ALL {
            assert!((dual_solution(&b0, 1, 1.5, &x, route).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kinetic_energy_second_cumulant_sees_collisions_only() {
        let ke = phase_fn(|x| 0.5 * crate::dynamics::dot(x[0].p, x[0].p));
        let x = head_on();
        // a head-on exchange conserves the pair energy: the second cumulant vanishes
        let v = dual_solution_additive(&ke, 1.0, 2, 2.0, &x).unwrap();
        assert!(v.abs() < 1e-12);
        let px = phase_fn(|x| x[0].q[0] * x[0].q[0]);
        let interacting = dual_solution_additive(&px, 1.0, 2, 2.0, &x).unwrap();
        let free = dual_solution_additive(&px, 1.0, 2, 0.4, &x).unwrap();
        // the exchange leaves each sphere σ further out than free flight
        assert!((interacting - 6.0).abs() < 1e-9, "{interacting}");
        assert!(free.abs() < 1e-12);
    }

    #[test]
    fn additive_and_kary_agree_with_general_route() {
        let b1 = phase_fn(|x| (x[0].q[0] * 0.3).sin() + x[0].p[1] * x[0].p[0]);
        let b0 = ObservableSeq::zero(1.0, 3).with_component(1, b1.clone());
        let x = vec![
            pt([-1.0, 0.1, 0.0], [1.0, 0.0, 0.2]),
            pt([1.0, 0.0, 0.0], [-1.0, 0.3, 0.0]),
            pt([0.0, 2.5, 0.0], [0.0, -1.0, 0.0]),
        ];
        for s in 1..=3 {
            let general = dual_partition(&b0, s, 2.0, &x[..s]).unwrap();
            let additive = dual_solution_additive(&b1, 1.0, s, 2.0, &x[..s]).unwrap();
            let kary = dual_solution_kary(&b1, 1, 1.0, s, 2.0, &x[..s]).unwrap();
            assert!((general - additive).abs() < 1e-12, "s={s}");
            assert!((general - kary).abs() < 1e-12, "s={s}");
        }
        let b2 = phase_fn(|x| x[0].q[0] * x[1].q[1]);
        assert_eq!(dual_solution_kary(&b2, 2, 1.0, 1, 1.0, &x[..1]).unwrap(), 0.0);
        let two = dual_solution_kary(&b2, 2, 1.0, 2, 1.0, &x[..2]).unwrap();
        let moved = crate::dynamics::evolve(
            &crate::dynamics::Configuration {
                sigma: 1.0,
                points: x[..2].to_vec(),
            },
            1.0,
        )
        .unwrap();
        assert!((two - b2(&moved.points)).abs() < 1e-12);
    }

    #[test]
    fn routes_agree_on_two_body_data() {
        let b0 = ObservableSeq::zero(1.0, 3)
            .with_component(0, phase_fn(|_| 0.7))
            .with_component(1, phase_fn(|x| x[0].q[0] + x[0].p[2]))
            .with_component(2, phase_fn(|x| x[0].p[0] * x[1].p[0] + x[1].q[2]))
            .with_component(3, phase_fn(|x| x[0].q[1] * x[1].q[0] * x[2].p[0]));
        let x = vec![
            pt([-1.0, 0.1, 0.0], [1.0, 0.0, 0.2]),
            pt([1.0, 0.0, 0.0], [-1.0, 0.3, 0.0]),
            pt([0.0, 2.5, 0.0], [0.0, -1.0, 0.0]),
        ];
        for s in 1..=3 {
            let a = dual_partition(&b0, s, 1.7, &x[..s]).unwrap();
            let b = dual_reduced(&b0, s, 1.7, &x[..s]).unwrap();
            let c = dual_direct(&b0, s, 1.7, &x[..s]).unwrap();
            assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "s={s}: {a} {b} {c}");
        }
    }

    #[test]
    fn cumulants_vanish_at_time_zero() {
        let b0 = ObservableSeq::zero(1.0, 2).with_component(1, phase_fn(|x| x[0].q[0]));
        let x = head_on();
        assert_eq!(dual_partition(&b0, 2, 0.0, &x).unwrap(), 0.0);
    }
}
