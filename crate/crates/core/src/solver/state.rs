//! Reduced distribution functions `F(t)` from the state cumulant series and
//! its reduced-cumulant form, with a Liouville oracle for finite systems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_point, mask_of, partitions_with_coefficients, SolverError, SubsetFlows};
use crate::dynamics::{evolve, Configuration, DynamicsError, PhasePoint};
use crate::functionals::norms::component_l1;
use crate::functionals::{integrate, MCEstimate, McError, Reject, SampleStatus, StateSeq};
use crate::partition::{binomial, factorial};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateRoute {
    /// Partition sums of backward group products.
    Cumulant,
    /// Alternating binomial sums `Σ_k (-1)^k C(n,k) S*_{s+n-k}` with frozen particles.
    Reduced,
}

impl StateRoute {
    pub fn name(self) -> &'static str {
        match self {
            StateRoute::Cumulant => "cumulant",
            StateRoute::Reduced => "reduced",
        }
    }
}

#[derive(Clone)]
pub struct StateSolutionRequest {
    pub s: usize,
    pub t: f64,
    pub f0: StateSeq,
    /// Series truncation: orders `0..=n_max`.
    pub n_max: usize,
    pub points: Vec<Vec<PhasePoint>>,
    pub n_samples: u64,
    pub seed: u64,
}

/// Per-point result: total and one estimate per series order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSolution {
    pub total: MCEstimate,
    pub orders: Vec<MCEstimate>,
}

/// Result of a whole request.
#[derive(Debug, Clone, PartialEq)]
pub struct StateReport {
    pub points: Vec<Result<StateSolution, SolverError>>,
    /// `Σ_{n > n_max} e^{n+2} ‖F⁰_{s+n}‖_{L¹}` over the truncated orders.
    pub tail_bound: f64,
    pub warning: Option<String>,
}

/// Tolerance above which a truncated tail triggers a warning.
pub const TAIL_TOLERANCE: f64 = 1e-3;

fn mc_reject(e: DynamicsError) -> Reject {
    if e.is_pathology() {
        Reject::Pathology
    } else {
        Reject::NonFinite
    }
}

/// `[𝔄*_{1+n}(t, {1..s}, s+1..s+n) F⁰_{s+n}](x)` for `x` of length `s+n`,
/// with the integrated particles of `F⁰` given by `z`.
pub fn state_cumulant_value(
    f0: &StateSeq,
    s: usize,
    t: f64,
    x: &[PhasePoint],
    z: &[PhasePoint],
    z_density: &[f64],
) -> Result<f64, DynamicsError> {
    let total = x.len();
    let n = total - s;
    let c_mask = mask_of(0..s);
    let flows = SubsetFlows::new(x, f0.sigma(), -t, |m| m & c_mask == c_mask || m & c_mask == 0)?;
    let mut composite = vec![PhasePoint::new([0.0; 3], [0.0; 3]); total];
    let mut value = 0.0;
    'partitions: for (partition, coef) in partitions_with_coefficients(1 + n) {
        for block in partition {
            let mask = block
                .iter()
                .fold(0u32, |m, &e| if e == 0 { m | c_mask } else { m | (1 << (s + e - 1)) });
            let Some(flow) = flows.flow(mask) else {
                continue 'partitions;
            };
            let mut rank = 0;
            for (i, slot) in composite.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    *slot = flow[rank];
                    rank += 1;
                }
            }
        }
        value += coef * f0.value_with(total, &composite, z, z_density);
    }
    Ok(value)
}

/// Reduced-cumulant integrand `Σ_k (-1)^k C(n,k) F⁰(Φ^{[s+n-k]}_{-t}(x), frozen)`.
pub fn state_reduced_value(
    f0: &StateSeq,
    s: usize,
    t: f64,
    x: &[PhasePoint],
    z: &[PhasePoint],
    z_density: &[f64],
) -> Result<f64, DynamicsError> {
    let total = x.len();
    let n = total - s;
    let mut value = 0.0;
    let mut moved = x.to_vec();
    for k in 0..=n {
        let head = total - k;
        let c = Configuration {
            sigma: f0.sigma(),
            points: x[..head].to_vec(),
        };
        let flowed = if t == 0.0 || head == 0 {
            c.points
        } else {
            match evolve(&c, -t) {
                Ok(end) => end.points,
                Err(DynamicsError::Overlap { .. }) => continue,
                Err(e) => return Err(e),
            }
        };
        moved[..head].copy_from_slice(&flowed);
        moved[head..].copy_from_slice(&x[head..]);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        value += sign * binomial(n, k) as f64 * f0.value_with(total, &moved, z, z_density);
    }
    Ok(value)
}

/// Estimate of the order-`n` term `(1/n!) ∫ 𝔄*_{1+n} F⁰_{s+n}` at `x`.
pub fn state_order_term(
    f0: &StateSeq,
    s: usize,
    n: usize,
    t: f64,
    x: &[PhasePoint],
    route: StateRoute,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate, SolverError> {
    if s + n > f0.n_max() {
        return Err(SolverError::Truncation {
            needed: s + n,
            n_max: f0.n_max(),
        });
    }
    if f0.is_zero(s + n) {
        return Ok(MCEstimate::exact(0.0));
    }
    let extra = f0.max_extra(s + n);
    let value_at = |all: &[PhasePoint], z: &[PhasePoint], dz: &[f64]| match route {
        StateRoute::Cumulant => state_cumulant_value(f0, s, t, all, z, dz),
        StateRoute::Reduced => state_reduced_value(f0, s, t, all, z, dz),
    };
    if n == 0 && extra == 0 {
        return Ok(MCEstimate::exact(value_at(x, &[], &[])?));
    }
    let moving = f0.sampling().clone().with_transport(vec![0.0, t]).slot();
    let frozen = f0.sampling().static_slot();
    let mut slots = vec![moving; n];
    slots.extend(std::iter::repeat(frozen).take(extra));
    let inv_fact = 1.0 / factorial(n) as f64;
    let est = integrate(&slots, n_samples, seed, "state-order", 1, |smp, out| {
        let mut all = x.to_vec();
        all.extend_from_slice(&smp.points[..n]);
        let v = value_at(&all, &smp.points[n..], &smp.densities[n..]).map_err(mc_reject)?;
        out[0] = v * inv_fact * smp.inverse_density(0..n);
        Ok(SampleStatus::Kept)
    })?;
    let mut e = est.channel(0);
    e.seed = seed;
    Ok(e)
}

/// `F_s(t, x)` through order `n_max`, one independent estimate per order.
pub fn state_solution_at(
    f0: &StateSeq,
    s: usize,
    t: f64,
    n_max: usize,
    x: &[PhasePoint],
    route: StateRoute,
    n_samples: u64,
    seed: u64,
) -> Result<StateSolution, SolverError> {
    check_point(x, s, f0.sigma())?;
    if s > 0 && t != 0.0 {
        // a pathological evaluation point would stall every sample
        evolve(
            &Configuration {
                sigma: f0.sigma(),
                points: x.to_vec(),
            },
            -t,
        )?;
    }
    let mut orders = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max.min(f0.n_max().saturating_sub(s)) {
        let sub = derive_seed(seed, route.name(), n as u64);
        orders.push(state_order_term(f0, s, n, t, x, route, n_samples, sub)?);
    }
    let mut total = MCEstimate::exact(orders.iter().map(|o| o.value).sum());
    total.stderr = orders.iter().map(|o| o.stderr * o.stderr).sum::<f64>().sqrt();
    total.n_samples = orders.iter().map(|o| o.n_samples).sum();
    total.rejected = orders.iter().map(|o| o.rejected).sum();
    total.redrawn = orders.iter().map(|o| o.redrawn).sum();
    total.seed = seed;
    Ok(StateSolution { total, orders })
}

/// `Σ_{n_max < n ≤ N_max - s} e^{n+2} ‖F⁰_{s+n}‖_{L¹}`.
pub fn tail_bound(f0: &StateSeq, s: usize, n_max: usize, n_samples: u64, seed: u64) -> Result<f64, McError> {
    let mut bound = 0.0;
    for n in n_max + 1..=f0.n_max().saturating_sub(s) {
        let l1 = component_l1(f0, s + n, n_samples, derive_seed(seed, "tail", n as u64))?;
        bound += (n as f64 + 2.0).exp() * l1.value;
    }
    Ok(bound)
}

pub fn state_solution_f(req: &StateSolutionRequest, route: StateRoute) -> Result<StateReport, SolverError> {
    if req.s + req.n_max > req.f0.n_max() {
        return Err(SolverError::Truncation {
            needed: req.s + req.n_max,
            n_max: req.f0.n_max(),
        });
    }
    let points = req
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let seed = derive_seed(req.seed, "state-point", i as u64);
            state_solution_at(&req.f0, req.s, req.t, req.n_max, x, route, req.n_samples, seed)
        })
        .collect();
    let tail = tail_bound(&req.f0, req.s, req.n_max, req.n_samples.min(100_000), req.seed)?;
    let warning = (tail > TAIL_TOLERANCE).then(|| {
        format!(
            "truncated tail bound {tail:.3e} exceeds {TAIL_TOLERANCE:e}; use n_max = {} for the complete series",
            req.f0.n_max() - req.s
        )
    });
    Ok(StateReport {
        points,
        tail_bound: tail,
        warning,
    })
}

/// Liouville oracle for a state supported on exactly `N` particles:
/// `F_s(t, x) = Z⁻¹ (1/(N-s)!) ∫ D_N(Φ^N_{-t}(x, y)) dy`, with `y` drawn from
/// the transported proposal.
pub fn liouville_oracle(
    d: &StateSeq,
    big_n: usize,
    normalization: f64,
    s: usize,
    t: f64,
    x: &[PhasePoint],
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate, SolverError> {
    check_point(x, s, d.sigma())?;
    let m = big_n - s;
    let moving = d.clone().with_sampling(d.sampling().clone().with_transport(vec![0.0, t]));
    let evolved = moving.evolve(t).exp_annihilation().scaled(1.0 / normalization);
    // keep only the term that came from D_N
    let mut only = StateSeq::zero(evolved.sampling().clone(), evolved.n_max());
    for term in evolved.terms(s) {
        if term.extra == m {
            only.push_term(s, term.clone());
        }
    }
    let slots = vec![only.sampling().slot(); m];
    let est = integrate(&slots, n_samples, seed, "oracle", 1, |smp, out| {
        let v = only.value_with(s, x, smp.points, smp.densities);
        if !v.is_finite() {
            return Err(Reject::Pathology);
        }
        out[0] = v;
        Ok(SampleStatus::Kept)
    })?;
    let mut e = est.channel(0);
    e.seed = seed;
    Ok(e)
}
