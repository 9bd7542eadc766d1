//! Consistency checks between the two hierarchies and against the generator.

use serde::Serialize;

use super::dual::{dual_cumulant_value, dual_partition};
use super::state::state_cumulant_value;
use super::{mask_of, SolverError, SubsetFlows};
use crate::dynamics::{add, evolve, is_allowed, next_collision, scale, Configuration, PhasePoint};
use crate::functionals::library::TestFunction;
use crate::functionals::{
    integrate, sample_configurations, ChannelEstimate, MCEstimate, ObservableSeq, Reject, SampleStatus, SamplingSpec,
    StateSeq,
};
use crate::partition::factorial;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub t: f64,
    /// `(B(t), F(0))`.
    pub lhs: MCEstimate,
    /// `(B(0), F(t))`.
    pub rhs: MCEstimate,
    /// `lhs - rhs` with the paired standard error.
    pub difference: MCEstimate,
    pub passed: bool,
}

/// Whether `|d| ≤ k · stderr`, counting an exact zero as agreement.
pub fn within_stderr(d: &MCEstimate, k: f64) -> bool {
    d.value == 0.0 || d.value.abs() <= k * d.stderr
}

/// Estimates `(B(t), F(0))` and `(B(0), F(t))` for components `1..=N_max`
/// from common samples. Both sides are grouped by the number `k` of
/// particles integrated over; the `k`-th group of the right side is
/// `Σ_s 1/(s!(k-s)!) ∫ B⁰_s(x_1..x_s) [𝔄*_{1+k-s}(t) F⁰_k](x)`. The `k = 0`
/// terms coincide on both sides and are omitted.
pub fn duality_check(
    b0: &ObservableSeq,
    f0: &StateSeq,
    t: f64,
    n_samples: u64,
    seed: u64,
) -> Result<DualityReport, SolverError> {
    let n_max = b0.n_max().min(f0.n_max());
    let sigma = f0.sigma();
    let moving = f0.sampling().clone().with_transport(vec![0.0, t]).slot();
    let frozen = f0.sampling().static_slot();
    let mut total = ChannelEstimate::zero(2, seed);
    for k in 1..=n_max {
        if f0.is_zero(k) {
            continue;
        }
        let extra = f0.max_extra(k);
        let mut slots = vec![moving.clone(); k];
        slots.extend(std::iter::repeat(frozen.clone()).take(extra));
        let est = integrate(&slots, n_samples, derive_seed(seed, "duality", k as u64), "duality", 2, |smp, out| {
            let (x, z) = smp.points.split_at(k);
            let dz = &smp.densities[k..];
            let w = smp.inverse_density(0..k);
            // F⁰ vanishes on overlapping configurations but the cumulants of
            // separately flowed groups do not
            out[0] = if is_allowed(x, sigma) {
                let bt = dual_partition(b0, k, t, x).map_err(|_| Reject::Pathology)?;
                w * bt * f0.value_with(k, x, z, dz) / factorial(k) as f64
            } else {
                0.0
            };
            let mut rhs = 0.0;
            for s in 1..=k {
                if b0.component(s).is_none() {
                    continue;
                }
                let b = b0.eval(s, &x[..s]);
                if b == 0.0 {
                    continue;
                }
                let a = state_cumulant_value(f0, s, t, x, z, dz).map_err(|_| Reject::Pathology)?;
                rhs += b * a / (factorial(s) * factorial(k - s)) as f64;
            }
            out[1] = w * rhs;
            Ok(SampleStatus::Kept)
        })?;
        total = total.add_independent(&est);
    }
    total.seed = seed;
    let difference = total.difference(0, 1);
    Ok(DualityReport {
        t,
        lhs: total.channel(0),
        rhs: total.channel(1),
        passed: within_stderr(&difference, 3.0),
        difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub reference: f64,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`; absent when every
    /// error is at rounding level.
    pub rate: Option<f64>,
}

/// Smallest accepted finite-difference step.
pub const MIN_STEP: f64 = 1e-6;

/// Central differences `(S(h)b - S(-h)b)/2h` at `x` against the free-streaming
/// generator `Σ_i <p_i, ∇_{q_i}> b`. Refuses points that reach contact within
/// twice the largest step in either time direction.
pub fn generator_consistency(
    b: &dyn Fn(&[PhasePoint]) -> f64,
    sigma: f64,
    x: &[PhasePoint],
    steps: &[f64],
) -> Result<GeneratorReport, SolverError> {
    let h_max = steps.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    if steps.is_empty() || steps.iter().any(|h| h.abs() < MIN_STEP) {
        return Err(SolverError::Precondition(format!(
            "finite-difference steps must be at least {MIN_STEP:e}"
        )));
    }
    let c = Configuration {
        sigma,
        points: x.to_vec(),
    };
    super::check_point(x, x.len(), sigma)?;
    let reversed = Configuration {
        sigma,
        points: x.iter().map(|p| PhasePoint::new(p.q, scale(p.p, -1.0))).collect(),
    };
    for dir in [&c, &reversed] {
        if let Some(ev) = next_collision(dir)? {
            if ev.time <= 2.0 * h_max {
                return Err(SolverError::Precondition(format!(
                    "contact within {:.3e} of the evaluation point; the free generator does not apply",
                    ev.time
                )));
            }
        }
    }
    let shifted = |eps: f64| -> f64 {
        let moved: Vec<PhasePoint> = x.iter().map(|p| PhasePoint::new(add(p.q, scale(p.p, eps)), p.p)).collect();
        b(&moved)
    };
    let e = 1e-3;
    let reference = (-shifted(2.0 * e) + 8.0 * shifted(e) - 8.0 * shifted(-e) + shifted(-2.0 * e)) / (12.0 * e);
    let mut errors = Vec::with_capacity(steps.len());
    for &h in steps {
        let fwd = evolve(&c, h)?;
        let bwd = evolve(&c, -h)?;
        let fd = (b(&fwd.points) - b(&bwd.points)) / (2.0 * h);
        errors.push((fd - reference).abs());
    }
    let usable: Vec<(f64, f64)> = steps
        .iter()
        .zip(&errors)
        .filter(|(_, &err)| err > 1e-11)
        .map(|(&h, &err)| (h.abs().ln(), err.ln()))
        .collect();
    let rate = (usable.len() >= 2).then(|| {
        let n = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(GeneratorReport {
        reference,
        steps: steps.to_vec(),
        errors,
        rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormCase {
    pub function: usize,
    /// Size of the cluster the function depends on.
    pub k: usize,
    /// Number of free labels joined to the cluster.
    pub n: usize,
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Sample-sup of `|𝔄_{1+n}(t, {1..k}, k+1..k+n) b_k|` against
/// `n! e^{n+2} sup|b_k|` for every library function, cluster size `k ≤ 2`,
/// `n ≤ n_max` and time.
pub fn norm_estimate_check(
    library: &[TestFunction],
    n_max: usize,
    times: &[f64],
    spec: &SamplingSpec,
    n_points: usize,
    seed: u64,
) -> Result<Vec<NormCase>, SolverError> {
    let mut cases = Vec::new();
    let sigma = spec.sigma;
    for (fi, f) in library.iter().enumerate() {
        for k in 1..=2usize {
            for n in 0..=n_max {
                let points = sample_configurations(spec, k + n, n_points, derive_seed(seed, "norm", (k * 16 + n) as u64));
                let b = |y: &[PhasePoint]| if is_allowed(y, sigma) { f.eval(y) } else { 0.0 };
                for &t in times {
                    let mut measured = 0.0f64;
                    let mut buf = Vec::new();
                    for x in &points {
                        let Ok(flows) = SubsetFlows::all(x, sigma, t) else {
                            continue;
                        };
                        let c_mask = mask_of(0..k);
                        let j_mask = mask_of(k..k + n);
                        let v = dual_cumulant_value(&flows, c_mask, j_mask, &b, &mut buf);
                        measured = measured.max(v.abs());
                    }
                    let bound = factorial(n) as f64 * (n as f64 + 2.0).exp() * f.sup_bound(k);
                    cases.push(NormCase {
                        function: fi,
                        k,
                        n,
                        t,
                        measured,
                        bound,
                        passed: measured <= bound,
                    });
                }
            }
        }
    }
    Ok(cases)
}
