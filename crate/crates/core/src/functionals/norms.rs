//! Sample-based surrogates of the `C_γ` and `L¹_α` norms.

use super::mc::{integrate, sample_configurations, MCEstimate, McError, SampleStatus, SamplingSpec};
use super::{ObservableSeq, StateSeq};
use crate::dynamics::{is_allowed, PhasePoint};
use crate::partition::factorial;
use crate::rng::derive_seed;

/// `max_n γⁿ/n! · sups[n]`.
pub fn c_gamma_from_sups(sups: &[f64], gamma: f64) -> f64 {
    sups.iter()
        .enumerate()
        .map(|(n, s)| gamma.powi(n as i32) / factorial(n) as f64 * s)
        .fold(0.0, f64::max)
}

/// `max |f|` over the given configurations.
pub fn sample_sup<F: Fn(&[PhasePoint]) -> f64>(f: F, samples: &[Vec<PhasePoint>]) -> f64 {
    samples.iter().map(|x| f(x).abs()).filter(|v| v.is_finite()).fold(0.0, f64::max)
}

/// Per-component sample maxima of `|b_n|` over `n_points` draws from `spec`.
pub fn observable_sups(b: &ObservableSeq, spec: &SamplingSpec, n_points: usize, seed: u64) -> Vec<f64> {
    (0..=b.n_max())
        .map(|n| {
            if b.component(n).is_none() {
                return 0.0;
            }
            let pts = sample_configurations(spec, n, n_points, derive_seed(seed, "sup", n as u64));
            sample_sup(|x| b.eval(n, x), &pts)
        })
        .collect()
}

/// `C_γ` surrogate of an observable sequence.
pub fn c_gamma(b: &ObservableSeq, gamma: f64, spec: &SamplingSpec, n_points: usize, seed: u64) -> f64 {
    c_gamma_from_sups(&observable_sups(b, spec, n_points, seed), gamma)
}

/// `∫|f_n|` surrogate; when the component carries integrated particles the
/// absolute value is taken inside the joint integral, which bounds the true
/// value from above.
pub fn component_l1(f: &StateSeq, n: usize, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    if f.is_zero(n) {
        return Ok(MCEstimate::exact(0.0));
    }
    let slots = vec![f.sampling().slot(); n + f.max_extra(n)];
    let est = integrate(&slots, n_samples, seed, "l1", 1, |s, out| {
        let (y, z) = s.points.split_at(n);
        if !is_allowed(y, f.sigma()) {
            return Ok(SampleStatus::Zeroed);
        }
        out[0] = f.value_with(n, y, z, &s.densities[n..]).abs() * s.inverse_density(0..n);
        Ok(SampleStatus::Kept)
    })?;
    Ok(est.channel(0))
}

/// `Σ_n αⁿ ∫|f_n|` surrogate built from [`component_l1`].
pub fn l1_alpha(f: &StateSeq, alpha: f64, n_samples: u64, seed: u64) -> Result<MCEstimate, McError> {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut total = MCEstimate::exact(0.0);
    for n in 0..=f.n_max() {
        let est = component_l1(f, n, n_samples, derive_seed(seed, "l1", n as u64))?;
        let a = alpha.powi(n as i32);
        value += a * est.value;
        var += a * a * est.stderr * est.stderr;
        total.n_samples += est.n_samples;
        total.rejected += est.rejected;
        total.redrawn += est.redrawn;
    }
    total.value = value;
    total.stderr = var.sqrt();
    total.seed = seed;
    Ok(total)
}
