//! Low-order iteration (Duhamel) series of the state hierarchy: nested time
//! integrals of free-then-interacting groups with collision terms in between.

use serde::{Deserialize, Serialize};

use super::collision::{collision_kernel_at, CollisionKernelSpec};
use super::state::{state_order_term, StateRoute};
use super::{check_point, SolverError};
use crate::dynamics::{evolve, Configuration, DynamicsError, PhasePoint, Vec3};
use crate::functionals::{integrate, MCEstimate, Reject, SampleStatus, SamplingSpec, StateSeq};
use crate::quadrature::{gauss_legendre, simplex2, SphereRule};
use crate::rng::derive_seed;

/// Gauss–Legendre nodes per time dimension, and the refined count used for
/// the error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub nodes: usize,
    pub refined: usize,
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        TimeQuadrature { nodes: 8, refined: 16 }
    }
}

/// One order of the iteration series: the refined-rule estimate and the
/// paired coarse-minus-refined difference as the quadrature error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTerm {
    pub order: usize,
    pub estimate: MCEstimate,
    pub quadrature_error: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub terms: Vec<IterationTerm>,
    pub total: MCEstimate,
    pub quadrature_error: f64,
}

/// Backward flow over `gap`; `None` when the start is forbidden.
fn back(points: &[PhasePoint], sigma: f64, gap: f64) -> Result<Option<Vec<PhasePoint>>, DynamicsError> {
    if gap == 0.0 || points.is_empty() {
        return Ok(Some(points.to_vec()));
    }
    let c = Configuration {
        sigma,
        points: points.to_vec(),
    };
    match evolve(&c, -gap) {
        Ok(end) => Ok(Some(end.points)),
        Err(DynamicsError::Overlap { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

struct Nested<'a> {
    f0: &'a StateSeq,
    rule: SphereRule,
    z: &'a [PhasePoint],
    z_density: &'a [f64],
}

impl Nested<'_> {
    /// `S*(gaps[0]) Σ_i ∫ ℒ*_int(i, ·) S*(gaps[1]) … F⁰` at `x`, with the fresh
    /// momenta fixed by `momenta`. NaN marks a pathological trajectory.
    fn eval(&self, x: &[PhasePoint], gaps: &[f64], momenta: &[Vec3]) -> f64 {
        let sigma = self.f0.sigma();
        let y = match back(x, sigma, gaps[0]) {
            Ok(Some(y)) => y,
            Ok(None) => return 0.0,
            Err(_) => return f64::NAN,
        };
        let Some((&p, rest)) = momenta.split_first() else {
            return self.f0.value_with(y.len(), &y, self.z, self.z_density);
        };
        let inner = |u: &[PhasePoint]| self.eval(u, &gaps[1..], rest);
        (0..y.len())
            .map(|i| collision_kernel_at(&inner, i, &y, p, &self.rule, sigma))
            .sum()
    }
}

/// Time nodes `(gaps, weight)` of the order-`n` simplex `t > t₁ > … > t_n > 0`.
fn time_nodes(order: usize, t: f64, nodes: usize) -> Vec<(Vec<f64>, f64)> {
    match order {
        1 => gauss_legendre(nodes, 0.0, t)
            .into_iter()
            .map(|(tau, w)| (vec![t - tau, tau], w))
            .collect(),
        2 => simplex2(nodes, t)
            .into_iter()
            .map(|((t1, t2), w)| (vec![t - t1, t1 - t2, t2], w))
            .collect(),
        _ => unreachable!("orders above 2 are not tabulated"),
    }
}

/// Order-`order` iteration term (1 or 2) at `x`.
#[allow(clippy::too_many_arguments)]
pub fn iteration_term(
    f0: &StateSeq,
    s: usize,
    order: usize,
    t: f64,
    x: &[PhasePoint],
    kernel: &CollisionKernelSpec,
    quad: &TimeQuadrature,
    n_samples: u64,
    seed: u64,
) -> Result<IterationTerm, SolverError> {
    if !(1..=2).contains(&order) {
        return Err(SolverError::Precondition(format!("iteration order {order} is outside 1..=2")));
    }
    if s + order > f0.n_max() {
        return Err(SolverError::Truncation {
            needed: s + order,
            n_max: f0.n_max(),
        });
    }
    if t == 0.0 || f0.is_zero(s + order) {
        let zero = MCEstimate::exact(0.0);
        return Ok(IterationTerm {
            order,
            estimate: zero,
            quadrature_error: zero,
        });
    }
    let coarse = time_nodes(order, t, quad.nodes);
    let fine = time_nodes(order, t, quad.refined);
    let extra = f0.max_extra(s + order);
    let momentum = SamplingSpec {
        beta: kernel.momentum_beta,
        ..SamplingSpec::default()
    }
    .static_slot();
    let mut slots = vec![momentum.clone(); order];
    slots.extend(std::iter::repeat(f0.sampling().static_slot()).take(extra));
    let est = integrate(&slots, n_samples, seed, "iteration", 2, |smp, out| {
        let momenta: Vec<Vec3> = smp.points[..order].iter().map(|p| p.p).collect();
        let weight: f64 = momenta.iter().map(|&p| 1.0 / momentum.momentum_density(p)).product();
        let nested = Nested {
            f0,
            rule: kernel.sphere,
            z: &smp.points[order..],
            z_density: &smp.densities[order..],
        };
        for (channel, rule) in [&fine, &coarse].into_iter().enumerate() {
            let mut acc = 0.0;
            for (gaps, w) in rule {
                acc += w * nested.eval(x, gaps, &momenta);
            }
            if !acc.is_finite() {
                return Err(Reject::Pathology);
            }
            out[channel] = acc * weight;
        }
        Ok(SampleStatus::Kept)
    })?;
    let mut estimate = est.channel(0);
    estimate.seed = seed;
    let mut quadrature_error = est.difference(1, 0);
    quadrature_error.seed = seed;
    Ok(IterationTerm {
        order,
        estimate,
        quadrature_error,
    })
}

/// The iteration series through `order_max ≤ 2` at `x`.
#[allow(clippy::too_many_arguments)]
pub fn iteration_series_state(
    f0: &StateSeq,
    s: usize,
    t: f64,
    x: &[PhasePoint],
    order_max: usize,
    kernel: &CollisionKernelSpec,
    quad: &TimeQuadrature,
    n_samples: u64,
    seed: u64,
) -> Result<IterationReport, SolverError> {
    check_point(x, s, f0.sigma())?;
    if order_max > 2 {
        return Err(SolverError::Precondition(format!("iteration order {order_max} is outside 0..=2")));
    }
    let lead = state_order_term(f0, s, 0, t, x, StateRoute::Cumulant, n_samples, derive_seed(seed, "iteration", 0))?;
    let mut terms = vec![IterationTerm {
        order: 0,
        estimate: lead,
        quadrature_error: MCEstimate::exact(0.0),
    }];
    for order in 1..=order_max {
        terms.push(iteration_term(
            f0,
            s,
            order,
            t,
            x,
            kernel,
            quad,
            n_samples,
            derive_seed(seed, "iteration", order as u64),
        )?);
    }
    let mut total = MCEstimate::exact(terms.iter().map(|o| o.estimate.value).sum());
    total.stderr = terms.iter().map(|o| o.estimate.stderr.powi(2)).sum::<f64>().sqrt();
    total.n_samples = terms.iter().map(|o| o.estimate.n_samples).sum();
    total.seed = seed;
    let quadrature_error = terms.iter().map(|o| o.quadrature_error.value.abs()).sum();
    Ok(IterationReport {
        terms,
        total,
        quadrature_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::library::StateSpec;

    #[test]
    fn time_zero_returns_initial_data() {
        let f0 = StateSpec::GaussianProduct {
            center: [0.0; 3],
            width: 1.5,
            beta: 1.0,
            weights: vec![0.0, 1.0, 0.5],
        }
        .build(1.0, 2);
        let x = [PhasePoint::new([0.2, 0.0, 0.0], [0.1, 0.0, 0.0])];
        let rep = iteration_series_state(&f0, 1, 0.0, &x, 1, &CollisionKernelSpec::default(), &TimeQuadrature::default(), 100, 1)
            .unwrap();
        assert_eq!(rep.total.value, f0.eval_exact(1, &x).unwrap());
        assert_eq!(rep.terms[1].estimate.value, 0.0);
    }

    #[test]
    fn simplex_gaps_sum_to_t() {
        for (gaps, _) in time_nodes(2, 1.3, 3) {
            assert!((gaps.iter().sum::<f64>() - 1.3).abs() < 1e-12);
            assert!(gaps.iter().all(|&g| g >= 0.0));
        }
    }
}
