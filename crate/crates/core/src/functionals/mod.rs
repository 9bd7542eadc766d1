//! Observable and state sequences over the grand-canonical phase space, the
//! creation/annihilation-type operators, mean-value functionals and their
//! Monte Carlo evaluation.

pub mod library;
pub mod mc;
pub mod norms;

use std::sync::Arc;

use thiserror::Error;

pub use mc::{
    integrate, maxwellian, sample_configurations, ChannelEstimate, MCEstimate, McError, PositionLaw, Reject, SampleStatus, SampleView,
    SamplingSpec, SlotLaw,
};

use crate::dynamics::{evolve, is_allowed, Configuration, DynamicsError, PhasePoint};
use crate::partition::factorial;
use crate::rng::derive_seed;

/// A function on n-particle phase space.
pub type PhaseFn = Arc<dyn Fn(&[PhasePoint]) -> f64 + Send + Sync>;

pub fn phase_fn<F>(f: F) -> PhaseFn
where
    F: Fn(&[PhasePoint]) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("component {0} is beyond the truncation order {1}")]
    Truncation(usize, usize),
}

/// Evaluates `f` along the flow, `f(Φ_t x)`; NaN on pathological trajectories.
fn along_flow(f: &PhaseFn, sigma: f64, x: &[PhasePoint], t: f64) -> f64 {
    if x.is_empty() || t == 0.0 {
        return f(x);
    }
    let c = Configuration {
        sigma,
        points: x.to_vec(),
    };
    match evolve(&c, t) {
        Ok(end) => f(&end.points),
        Err(DynamicsError::Overlap { .. }) => 0.0,
        Err(_) => f64::NAN,
    }
}

/// `A = (A₀, A₁, …, A_{N_max})`; absent components are zero. Every
/// evaluation vanishes on forbidden configurations.
#[derive(Clone)]
pub struct ObservableSeq {
    sigma: f64,
    components: Vec<Option<PhaseFn>>,
}

impl ObservableSeq {
    pub fn zero(sigma: f64, n_max: usize) -> Self {
        ObservableSeq {
            sigma,
            components: vec![None; n_max + 1],
        }
    }

    fn constants(sigma: f64, values: impl Fn(usize) -> f64, n_max: usize) -> Self {
        let mut seq = ObservableSeq::zero(sigma, n_max);
        for n in 0..=n_max {
            let v = values(n);
            if v != 0.0 {
                seq.components[n] = Some(phase_fn(move |_| v));
            }
        }
        seq
    }

    /// `I = (1, 1, …)`.
    pub fn unit(sigma: f64, n_max: usize) -> Self {
        Self::constants(sigma, |_| 1.0, n_max)
    }

    /// Number of particles as a full observable, `(0, 1, 2, …)`.
    pub fn number(sigma: f64, n_max: usize) -> Self {
        Self::constants(sigma, |n| n as f64, n_max)
    }

    /// Reduced number observable `N⁽¹⁾ = (0, 1, 0, …)`.
    pub fn reduced_number(sigma: f64, n_max: usize) -> Self {
        Self::constants(sigma, |n| if n == 1 { 1.0 } else { 0.0 }, n_max)
    }

    pub fn with_component(mut self, n: usize, f: PhaseFn) -> Self {
        self.components[n] = Some(f);
        self
    }

    pub fn set_component(&mut self, n: usize, f: Option<PhaseFn>) {
        self.components[n] = f;
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_max(&self) -> usize {
        self.components.len() - 1
    }

    pub fn component(&self, n: usize) -> Option<&PhaseFn> {
        self.components.get(n).and_then(|c| c.as_ref())
    }

    /// `b_n(x)`, zero beyond truncation and on forbidden configurations.
    pub fn eval(&self, n: usize, x: &[PhasePoint]) -> f64 {
        debug_assert_eq!(x.len(), n);
        match self.component(n) {
            Some(f) if is_allowed(x, self.sigma) => f(x),
            _ => 0.0,
        }
    }

    fn map_components(&self, build: impl Fn(usize) -> Option<PhaseFn>) -> ObservableSeq {
        ObservableSeq {
            sigma: self.sigma,
            components: (0..=self.n_max()).map(build).collect(),
        }
    }

    /// `(𝔞⁺b)_s = Σ_j b_{s-1}(x ∖ x_j)`.
    pub fn creation(&self) -> ObservableSeq {
        let src = self.clone();
        self.map_components(|s| {
            if s == 0 || src.component(s - 1).is_none() {
                return None;
            }
            let src = src.clone();
            Some(phase_fn(move |x| {
                let mut rest = Vec::with_capacity(s - 1);
                (0..s)
                    .map(|j| {
                        rest.clear();
                        rest.extend(x.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, p)| *p));
                        src.eval(s - 1, &rest)
                    })
                    .sum()
            }))
        })
    }

    /// `e^{λ𝔞⁺}` for `λ = ±1`: component `s` is `Σ_{K ⊆ [s]} λ^{|K|} b_{s-|K|}(x ∖ x_K)`.
    pub fn exp_creation(&self, lambda: f64) -> ObservableSeq {
        let src = self.clone();
        self.map_components(|s| {
            if (0..=s).all(|k| src.component(k).is_none()) {
                return None;
            }
            let src = src.clone();
            Some(phase_fn(move |x| {
                let mut rest = Vec::with_capacity(s);
                let mut total = 0.0;
                for mask in 0u32..(1u32 << s) {
                    let removed = mask.count_ones() as usize;
                    if src.component(s - removed).is_none() {
                        continue;
                    }
                    rest.clear();
                    rest.extend((0..s).filter(|i| mask & (1 << i) == 0).map(|i| x[i]));
                    total += lambda.powi(removed as i32) * src.eval(s - removed, &rest);
                }
                total
            }))
        })
    }

    /// `B = e^{-𝔞⁺}A`.
    pub fn reduce_observable(&self) -> ObservableSeq {
        self.exp_creation(-1.0)
    }

    /// `S(t)`: every component composed with the n-particle flow. Forbidden
    /// starting points give 0, pathological trajectories NaN.
    pub fn evolve(&self, t: f64) -> ObservableSeq {
        let sigma = self.sigma;
        self.map_components(|n| {
            let f = self.component(n)?.clone();
            Some(phase_fn(move |x| along_flow(&f, sigma, x, t)))
        })
    }
}

/// One summand of a state component: `weight · ∫ density(x, z) dz` over
/// `extra` integrated particles `z`. The density must itself vanish on
/// forbidden configurations of all its arguments.
#[derive(Clone)]
pub struct MarginalTerm {
    pub weight: f64,
    pub extra: usize,
    pub density: PhaseFn,
}

/// `D = (D₀, D₁, …)` with each component a finite sum of marginal terms, plus
/// the sampling law used for all of its integrals.
#[derive(Clone)]
pub struct StateSeq {
    sigma: f64,
    components: Vec<Vec<MarginalTerm>>,
    sampling: SamplingSpec,
}

impl StateSeq {
    pub fn zero(sampling: SamplingSpec, n_max: usize) -> Self {
        StateSeq {
            sigma: sampling.sigma,
            components: vec![Vec::new(); n_max + 1],
            sampling,
        }
    }

    /// `D₀ = 1`, all other components zero.
    pub fn vacuum(sampling: SamplingSpec, n_max: usize) -> Self {
        let mut d = StateSeq::zero(sampling, n_max);
        d.push_term(0, MarginalTerm {
            weight: 1.0,
            extra: 0,
            density: phase_fn(|_| 1.0),
        });
        d
    }

    pub fn with_density(mut self, n: usize, weight: f64, density: PhaseFn) -> Self {
        self.push_term(n, MarginalTerm { weight, extra: 0, density });
        self
    }

    pub fn push_term(&mut self, n: usize, term: MarginalTerm) {
        self.components[n].push(term);
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_max(&self) -> usize {
        self.components.len() - 1
    }

    pub fn sampling(&self) -> &SamplingSpec {
        &self.sampling
    }

    pub fn with_sampling(mut self, sampling: SamplingSpec) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn terms(&self, n: usize) -> &[MarginalTerm] {
        self.components.get(n).map_or(&[], |c| c.as_slice())
    }

    pub fn is_zero(&self, n: usize) -> bool {
        self.terms(n).is_empty()
    }

    /// Number of integrated particles needed to evaluate component `n`.
    pub fn max_extra(&self, n: usize) -> usize {
        self.terms(n).iter().map(|t| t.extra).max().unwrap_or(0)
    }

    /// Integrand of component `n` at `y`, given jointly sampled extra points
    /// `z` with proposal densities `z_density` (each term uses a prefix of `z`).
    pub fn value_with(&self, n: usize, y: &[PhasePoint], z: &[PhasePoint], z_density: &[f64]) -> f64 {
        if !is_allowed(y, self.sigma) {
            return 0.0;
        }
        let mut buf: Vec<PhasePoint> = Vec::with_capacity(n + z.len());
        let mut total = 0.0;
        for term in self.terms(n) {
            buf.clear();
            buf.extend_from_slice(y);
            buf.extend_from_slice(&z[..term.extra]);
            let inv: f64 = z_density[..term.extra].iter().map(|d| 1.0 / d).product();
            let v = (term.density)(&buf);
            if v != 0.0 {
                total += term.weight * v * inv;
            }
        }
        total
    }

    /// Pointwise value when no term carries integrated particles.
    pub fn eval_exact(&self, n: usize, y: &[PhasePoint]) -> Option<f64> {
        (self.max_extra(n) == 0).then(|| self.value_with(n, y, &[], &[]))
    }

    fn map_terms(&self, build: impl Fn(usize) -> Vec<MarginalTerm>) -> StateSeq {
        StateSeq {
            sigma: self.sigma,
            components: (0..=self.n_max()).map(build).collect(),
            sampling: self.sampling.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> StateSeq {
        self.map_terms(|n| {
            self.terms(n)
                .iter()
                .map(|t| MarginalTerm {
                    weight: t.weight * c,
                    ..t.clone()
                })
                .collect()
        })
    }

    /// `(𝔞f)_n = ∫ f_{n+1} dx_{n+1}`, kept symbolic as one more integrated particle.
    pub fn annihilation(&self) -> StateSeq {
        self.map_terms(|n| {
            self.terms(n + 1)
                .iter()
                .map(|t| MarginalTerm {
                    extra: t.extra + 1,
                    ..t.clone()
                })
                .collect()
        })
    }

    /// `(e^{𝔞}D)_s = Σ_n (1/n!) ∫ D_{s+n}`, truncated at `N_max`.
    pub fn exp_annihilation(&self) -> StateSeq {
        self.map_terms(|s| {
            let mut out = Vec::new();
            for n in 0..=self.n_max() - s {
                let inv = 1.0 / factorial(n) as f64;
                out.extend(self.terms(s + n).iter().map(|t| MarginalTerm {
                    weight: t.weight * inv,
                    extra: t.extra + n,
                    density: t.density.clone(),
                }));
            }
            out
        })
    }

    /// `S*(t)`: component `n` composed with the backward n-particle flow.
    pub fn evolve(&self, t: f64) -> StateSeq {
        let sigma = self.sigma;
        self.map_terms(|n| {
            self.terms(n)
                .iter()
                .map(|term| {
                    let f = term.density.clone();
                    let density = phase_fn(move |x: &[PhasePoint]| {
                        let (y, z) = x.split_at(n);
                        let c = Configuration {
                            sigma,
                            points: y.to_vec(),
                        };
                        let back = if n == 0 || t == 0.0 {
                            c
                        } else {
                            match evolve(&c, -t) {
                                Ok(b) => b,
                                Err(DynamicsError::Overlap { .. }) => return 0.0,
                                Err(_) => return f64::NAN,
                            }
                        };
                        let mut all = back.points;
                        all.extend_from_slice(z);
                        f(&all)
                    });
                    MarginalTerm {
                        weight: term.weight,
                        extra: term.extra,
                        density,
                    }
                })
                .collect()
        })
    }

    /// MC estimate of component `n` at the fixed point `y`, integrating out the
    /// extra particles with the sampling law. Exact when none remain.
    pub fn integrate_at(&self, n: usize, y: &[PhasePoint], n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
        let extra = self.max_extra(n);
        if extra == 0 {
            return Ok(MCEstimate::exact(self.value_with(n, y, &[], &[])));
        }
        let slots = vec![self.sampling.slot(); extra];
        let est = integrate(&slots, n_samples, seed, "state-at", 1, |s, out| {
            out[0] = self.value_with(n, y, s.points, s.densities);
            Ok(SampleStatus::Kept)
        })?;
        Ok(est.channel(0))
    }
}

/// Channels `[(B, F), (I, F)]` with `(B, F) = Σ_n (1/n!) ∫ B_n F_n`.
/// Each `n` is estimated independently from common samples in both channels.
pub fn pairing_channels(
    b: &ObservableSeq,
    f: &StateSeq,
    n_samples: u64,
    seed: u64,
) -> Result<ChannelEstimate, McError> {
    let mut total = ChannelEstimate::zero(2, seed);
    let slot = f.sampling().slot();
    for n in 0..=f.n_max().min(b.n_max()) {
        if f.is_zero(n) {
            continue;
        }
        let extra = f.max_extra(n);
        let slots = vec![slot.clone(); n + extra];
        let inv_fact = 1.0 / factorial(n) as f64;
        let reject = f.sampling().reject_overlaps;
        let est = integrate(&slots, n_samples, derive_seed(seed, "pairing", n as u64), "pairing", 2, |s, out| {
            let (y, z) = s.points.split_at(n);
            if !is_allowed(y, f.sigma()) {
                return Ok(if reject { SampleStatus::Zeroed } else { SampleStatus::Kept });
            }
            let w = s.inverse_density(0..n) * inv_fact;
            let v = f.value_with(n, y, z, &s.densities[n..]) * w;
            out[0] = b.eval(n, y) * v;
            out[1] = v;
            Ok(SampleStatus::Kept)
        })?;
        total = total.add_independent(&est);
    }
    total.seed = seed;
    Ok(total)
}

/// `(B, F)`.
pub fn pairing(b: &ObservableSeq, f: &StateSeq, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    Ok(pairing_channels(b, f, n_samples, seed)?.channel(0))
}

/// `(I, D)`.
pub fn normalization(d: &StateSeq, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    Ok(pairing_channels(&ObservableSeq::unit(d.sigma(), d.n_max()), d, n_samples, seed)?.channel(1))
}

/// `⟨A⟩ = (A, D) / (I, D)` with common samples in numerator and denominator.
pub fn mean_value(a: &ObservableSeq, d: &StateSeq, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    pairing_channels(a, d, n_samples, seed)?.ratio(0, 1)
}

/// `F = (I, D)⁻¹ e^{𝔞} D`, returned with the normalization estimate.
pub fn reduce_state(d: &StateSeq, n_samples: u64, seed: u64) -> Result<(StateSeq, MCEstimate), McError> {
    let z = normalization(d, n_samples, seed)?;
    if z.value.abs() <= 3.0 * z.stderr || z.value == 0.0 {
        return Err(McError::DegenerateNormalization {
            value: z.value,
            stderr: z.stderr,
        });
    }
    Ok((d.exp_annihilation().scaled(1.0 / z.value), z))
}

/// Expectation of `g` on `k` particles under the sampling law. Overlapping
/// proposals are redrawn when the law rejects overlaps, so `g ≡ c` gives `c ± 0`
/// and forbidden-region indicators give 0.
pub fn mc_integrate(g: &PhaseFn, k: usize, spec: &SamplingSpec, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    let slots = vec![spec.slot(); k];
    let est = integrate(&slots, n_samples, seed, "mc-integrate", 1, |s, out| {
        if spec.reject_overlaps && !is_allowed(s.points, spec.sigma) {
            return Err(Reject::Overlap);
        }
        let v = g(s.points);
        if !v.is_finite() {
            return Err(Reject::NonFinite);
        }
        out[0] = v;
        Ok(SampleStatus::Kept)
    })?;
    Ok(est.channel(0))
}

/// Lebesgue integral `∫ g` over allowed `k`-particle configurations,
/// importance-weighted by the sampling law; overlapping proposals count as zero.
pub fn mc_lebesgue(g: &PhaseFn, k: usize, spec: &SamplingSpec, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    let slots = vec![spec.slot(); k];
    let est = integrate(&slots, n_samples, seed, "mc-lebesgue", 1, |s, out| {
        if !is_allowed(s.points, spec.sigma) {
            return Ok(SampleStatus::Zeroed);
        }
        let v = g(s.points);
        if !v.is_finite() {
            return Err(Reject::NonFinite);
        }
        out[0] = v * s.inverse_density(0..k);
        Ok(SampleStatus::Kept)
    })?;
    Ok(est.channel(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::dot;

    fn pt(q: [f64; 3], p: [f64; 3]) -> PhasePoint {
        PhasePoint::new(q, p)
    }

    #[test]
    fn creation_examples() {
        let b = ObservableSeq::zero(1.0, 3).with_component(0, phase_fn(|_| 1.0));
        let c = b.creation();
        assert_eq!(c.eval(1, &[pt([0.0; 3], [1.0, 0.0, 0.0])]), 1.0);
        assert!(c.component(0).is_none());
        let b1 = ObservableSeq::zero(1.0, 3).with_component(1, phase_fn(|x| x[0].q[0]));
        let x = [pt([0.5, 0.0, 0.0], [0.0; 3]), pt([3.0, 0.0, 0.0], [0.0; 3])];
        assert_eq!(b1.creation().eval(2, &x), 3.5);
    }

    #[test]
    fn reduction_low_components() {
        let a = ObservableSeq::zero(1.0, 3)
            .with_component(0, phase_fn(|_| 0.25))
            .with_component(1, phase_fn(|x| x[0].p[1]))
            .with_component(2, phase_fn(|x| x[0].q[0] * x[1].q[0]));
        let b = a.reduce_observable();
        let x1 = pt([0.0, 1.0, 2.0], [0.5, -1.5, 2.0]);
        let x2 = pt([2.5, 0.0, 0.0], [0.1, 0.7, 0.0]);
        assert_eq!(b.eval(1, &[x1]), -1.5 - 0.25);
        let expected = 0.0 * 2.5 - (-1.5) - 0.7 + 0.25;
        assert!((b.eval(2, &[x1, x2]) - expected).abs() < 1e-15);
        let back = b.exp_creation(1.0);
        for n in 0..=2 {
            let pts = [x1, x2];
            assert!((back.eval(n, &pts[..n]) - a.eval(n, &pts[..n])).abs() < 1e-14);
        }
    }

    #[test]
    fn number_observable_reduces_to_first_component() {
        let b = ObservableSeq::number(1.0, 4).reduce_observable();
        let pts: Vec<_> = (0..4).map(|i| pt([2.0 * i as f64, 0.0, 0.0], [0.0; 3])).collect();
        for n in 0..=4 {
            let expected = if n == 1 { 1.0 } else { 0.0 };
            assert!((b.eval(n, &pts[..n]) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn forbidden_configurations_evaluate_to_zero() {
        let b = ObservableSeq::unit(1.0, 2);
        let x = [pt([0.0; 3], [0.0; 3]), pt([0.5, 0.0, 0.0], [0.0; 3])];
        assert_eq!(b.eval(2, &x), 0.0);
    }

    #[test]
    fn constant_and_moment_and_indicator() {
        let spec = SamplingSpec::default();
        let c = mc_integrate(&phase_fn(|_| 3.25), 2, &spec, 4000, 1).unwrap();
        assert_eq!((c.value, c.stderr), (3.25, 0.0));
        let m = mc_integrate(&phase_fn(|x| dot(x[0].p, x[0].p)), 1, &spec, 100_000, 2).unwrap();
        assert!((m.value - 3.0).abs() < 3.0 * m.stderr, "{m:?}");
        let forbidden = phase_fn(|x| f64::from(u8::from(!is_allowed(x, 1.0))));
        let dense = SamplingSpec {
            box_len: 2.0,
            ..SamplingSpec::default()
        };
        let f = mc_integrate(&forbidden, 2, &dense, 4000, 3).unwrap();
        assert_eq!(f.value, 0.0);
        assert!(f.rejected > 0);
    }

    #[test]
    fn mean_of_unit_is_exactly_one() {
        let d = library::StateSpec::GaussianProduct {
            center: [5.0; 3],
            width: 1.5,
            beta: 1.0,
            weights: vec![1.0, 0.5, 0.2, 0.1],
        }
        .build(1.0, 3);
        let m = mean_value(&ObservableSeq::unit(1.0, 3), &d, 5000, 4).unwrap();
        assert_eq!(m.value, 1.0);
        assert!(m.stderr < 1e-12);
    }
}
