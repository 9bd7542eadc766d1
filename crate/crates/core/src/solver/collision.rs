//! The hard-sphere collision term acting on an `(s+1)`-particle function,
//! integrated over the fresh particle.

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::dynamics::{add, dot, is_allowed, scale, sub, Configuration, PhasePoint, Vec3};
use crate::functionals::{integrate, MCEstimate, PhaseFn, SampleStatus, SamplingSpec};
use crate::quadrature::SphereRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionKernelSpec {
    pub sphere: SphereRule,
    /// Inverse temperature of the Gaussian proposal for the fresh momentum.
    pub momentum_beta: f64,
    pub n_samples: u64,
}

impl Default for CollisionKernelSpec {
    fn default() -> Self {
        CollisionKernelSpec {
            sphere: SphereRule::Lebedev26,
            momentum_beta: 1.0,
            n_samples: 20_000,
        }
    }
}

/// `σ² ∫_{<η, p_i - p> > 0} dη <η, p_i - p> [f(gain) - f(loss)]` at a fixed
/// fresh momentum `p`. The gain configuration carries the starred momenta
/// with the fresh particle at `q_i - ση`; the loss configuration keeps the
/// momenta with the fresh particle at `q_i + ση`. Contact points inside
/// another sphere contribute nothing.
pub fn collision_kernel_at<F>(f: &F, i: usize, y: &[PhasePoint], p: Vec3, rule: &SphereRule, sigma: f64) -> f64
where
    F: Fn(&[PhasePoint]) -> f64 + ?Sized,
{
    let axis = sub(y[i].p, p);
    let nodes = rule.hemisphere(axis);
    if nodes.is_empty() {
        return 0.0;
    }
    let mut config = y.to_vec();
    config.push(PhasePoint::new([0.0; 3], [0.0; 3]));
    let last = y.len();
    let mut total = 0.0;
    for (eta, w) in nodes {
        let g = dot(eta, axis);
        let kick = scale(eta, g);
        config[i].p = sub(y[i].p, kick);
        config[last] = PhasePoint::new(sub(y[i].q, scale(eta, sigma)), add(p, kick));
        let gain = if is_allowed(&config, sigma) { f(&config) } else { 0.0 };
        config[i].p = y[i].p;
        config[last] = PhasePoint::new(add(y[i].q, scale(eta, sigma)), p);
        let loss = if is_allowed(&config, sigma) { f(&config) } else { 0.0 };
        total += w * g * (gain - loss);
    }
    sigma * sigma * total
}

/// `∫ dx_{s+1} ℒ*_int(i, s+1) f` at the configuration `c`, with the sphere
/// integral by quadrature and the fresh momentum by Monte Carlo.
pub fn collision_operator_state(
    f: &PhaseFn,
    i: usize,
    c: &Configuration,
    spec: &CollisionKernelSpec,
    seed: u64,
) -> Result<MCEstimate, SolverError> {
    super::check_point(&c.points, c.points.len(), c.sigma)?;
    if i >= c.points.len() {
        return Err(SolverError::Precondition(format!("label {i} outside the configuration")));
    }
    let law = SamplingSpec {
        beta: spec.momentum_beta,
        ..SamplingSpec::default()
    }
    .static_slot();
    let est = integrate(&[law.clone()], spec.n_samples, seed, "collision", 1, |s, out| {
        let p = s.points[0].p;
        out[0] = collision_kernel_at(f.as_ref(), i, &c.points, p, &spec.sphere, c.sigma) / law.momentum_density(p);
        Ok(SampleStatus::Kept)
    })?;
    let mut e = est.channel(0);
    e.seed = seed;
    Ok(e)
}
