//! Monte Carlo engine: per-particle proposal laws, chunked counter-based
//! streams, and mergeable multi-channel moment accumulators.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{add, dot, scale, PhasePoint, Vec3};
use crate::rng::{stream, CHUNK};

/// Consecutive redraws tolerated for a single sample.
pub const MAX_REDRAW_STREAK: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("{0} consecutive samples were rejected; the integrand is unusable under this law")]
    TooManyRedraws(u64),
    #[error("at least two samples are needed for an error estimate")]
    TooFewSamples,
    #[error("normalization {value} is within 3 standard errors ({stderr}) of zero")]
    DegenerateNormalization { value: f64, stderr: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositionLaw {
    /// Uniform on `[0, L]³`.
    UniformBox,
    Gaussian { center: Vec3, std: f64 },
}

/// Sampling laws for phase points: positions from `positions`, momenta
/// isotropic Gaussian with variance `1/β`. A proposed point may be transported
/// along its momentum, `q = q₀ + τ p`, with `τ` drawn uniformly from
/// `transport_times`; the proposal density accounts for the mixture exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub sigma: f64,
    pub box_len: f64,
    pub beta: f64,
    pub positions: PositionLaw,
    pub transport_times: Vec<f64>,
    pub reject_overlaps: bool,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            sigma: 1.0,
            box_len: 10.0,
            beta: 1.0,
            positions: PositionLaw::UniformBox,
            transport_times: vec![0.0],
            reject_overlaps: true,
        }
    }
}

impl SamplingSpec {
    pub fn gaussian(center: Vec3, std: f64) -> Self {
        SamplingSpec {
            positions: PositionLaw::Gaussian { center, std },
            ..SamplingSpec::default()
        }
    }

    pub fn with_transport(mut self, times: Vec<f64>) -> Self {
        self.transport_times = times;
        self
    }

    pub fn with_overlap_rejection(mut self, on: bool) -> Self {
        self.reject_overlaps = on;
        self
    }

    /// Slot law including the transport mixture.
    pub fn slot(&self) -> SlotLaw {
        SlotLaw {
            positions: self.positions.clone(),
            box_len: self.box_len,
            beta: self.beta,
            times: if self.transport_times.is_empty() {
                vec![0.0]
            } else {
                self.transport_times.clone()
            },
        }
    }

    /// Slot law without transport.
    pub fn static_slot(&self) -> SlotLaw {
        SlotLaw {
            times: vec![0.0],
            ..self.slot()
        }
    }
}

/// Proposal law of one particle slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLaw {
    positions: PositionLaw,
    box_len: f64,
    beta: f64,
    times: Vec<f64>,
}

impl SlotLaw {
    fn position_density(&self, q: Vec3) -> f64 {
        match &self.positions {
            PositionLaw::UniformBox => {
                let l = self.box_len;
                if q.iter().all(|&x| (0.0..=l).contains(&x)) {
                    1.0 / (l * l * l)
                } else {
                    0.0
                }
            }
            PositionLaw::Gaussian { center, std } => {
                let d = [q[0] - center[0], q[1] - center[1], q[2] - center[2]];
                let v = std * std;
                (-(dot(d, d)) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).powf(1.5)
            }
        }
    }

    pub fn momentum_density(&self, p: Vec3) -> f64 {
        maxwellian(p, self.beta)
    }

    pub fn density(&self, x: &PhasePoint) -> f64 {
        let m: f64 = self
            .times
            .iter()
            .map(|&tau| self.position_density(add(x.q, scale(x.p, -tau))))
            .sum::<f64>()
            / self.times.len() as f64;
        m * self.momentum_density(x.p)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (PhasePoint, f64) {
        let sd = 1.0 / self.beta.sqrt();
        let p: Vec3 = [
            sd * rng.sample::<f64, _>(StandardNormal),
            sd * rng.sample::<f64, _>(StandardNormal),
            sd * rng.sample::<f64, _>(StandardNormal),
        ];
        let q0: Vec3 = match &self.positions {
            PositionLaw::UniformBox => [
                rng.gen::<f64>() * self.box_len,
                rng.gen::<f64>() * self.box_len,
                rng.gen::<f64>() * self.box_len,
            ],
            PositionLaw::Gaussian { center, std } => [
                center[0] + std * rng.sample::<f64, _>(StandardNormal),
                center[1] + std * rng.sample::<f64, _>(StandardNormal),
                center[2] + std * rng.sample::<f64, _>(StandardNormal),
            ],
        };
        let tau = if self.times.len() == 1 {
            self.times[0]
        } else {
            self.times[rng.gen_range(0..self.times.len())]
        };
        let x = PhasePoint::new(add(q0, scale(p, tau)), p);
        let d = self.density(&x);
        (x, d)
    }
}

/// `(β/2π)^{3/2} exp(-β|p|²/2)`.
pub fn maxwellian(p: Vec3, beta: f64) -> f64 {
    (beta / (2.0 * std::f64::consts::PI)).powf(1.5) * (-0.5 * beta * dot(p, p)).exp()
}

/// One drawn sample: points and the proposal density of each slot.
pub struct SampleView<'a> {
    pub points: &'a [PhasePoint],
    pub densities: &'a [f64],
}

impl SampleView<'_> {
    /// `1 / Π q_i` over the slots in `range`.
    pub fn inverse_density(&self, range: std::ops::Range<usize>) -> f64 {
        self.densities[range].iter().map(|d| 1.0 / d).product()
    }
}

/// Reasons to discard a sample and draw a replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reject {
    Pathology,
    NonFinite,
    Overlap,
}

/// A sample kept in the average; `Zeroed` marks overlap proposals kept as zero samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStatus {
    Kept,
    Zeroed,
}

/// Value, standard error and bookkeeping of one estimated quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Overlapping proposals (kept as zero or redrawn).
    pub rejected: u64,
    /// Samples replaced because of pathologies or non-finite values.
    pub redrawn: u64,
}

impl MCEstimate {
    pub fn exact(value: f64) -> Self {
        MCEstimate {
            value,
            stderr: 0.0,
            n_samples: 0,
            seed: 0,
            rejected: 0,
            redrawn: 0,
        }
    }

    /// Whether `self` and `other` agree within `k` combined standard errors
    /// (independent estimates).
    pub fn agrees_with(&self, other: &MCEstimate, k: f64) -> bool {
        let combined = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        (self.value - other.value).abs() <= k * combined
    }

    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.value.abs()
    }
}

#[derive(Debug, Clone)]
struct Moments {
    n: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
    rejected: u64,
    redrawn: u64,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; k],
            comoment: vec![0.0; k * k],
            rejected: 0,
            redrawn: 0,
        }
    }

    fn push(&mut self, x: &[f64], delta: &mut [f64]) {
        let k = self.mean.len();
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for i in 0..k {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] * inv;
        }
        for i in 0..k {
            let after = x[i] - self.mean[i];
            for j in 0..k {
                self.comoment[i * k + j] += delta[j] * after;
            }
        }
    }

    /// Pairwise merge of moment summaries.
    fn merge(mut self, other: &Moments) -> Moments {
        let k = self.mean.len();
        if other.n > 0 {
            if self.n == 0 {
                let (r, d) = (self.rejected, self.redrawn);
                self = other.clone();
                self.rejected += r;
                self.redrawn += d;
                return self;
            }
            let (na, nb) = (self.n as f64, other.n as f64);
            let n = na + nb;
            let delta: Vec<f64> = (0..k).map(|i| other.mean[i] - self.mean[i]).collect();
            for i in 0..k {
                for j in 0..k {
                    self.comoment[i * k + j] += other.comoment[i * k + j] + delta[i] * delta[j] * na * nb / n;
                }
            }
            for i in 0..k {
                self.mean[i] += delta[i] * nb / n;
            }
            self.n += other.n;
        }
        self.rejected += other.rejected;
        self.redrawn += other.redrawn;
        self
    }
}

/// Means of several channels estimated from common samples, with the
/// covariance matrix of the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub means: Vec<f64>,
    pub covariance: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    pub rejected: u64,
    pub redrawn: u64,
}

impl ChannelEstimate {
    pub fn channels(&self) -> usize {
        self.means.len()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.channels() + j]
    }

    fn with_value(&self, value: f64, variance: f64) -> MCEstimate {
        MCEstimate {
            value,
            stderr: variance.max(0.0).sqrt(),
            n_samples: self.n_samples,
            seed: self.seed,
            rejected: self.rejected,
            redrawn: self.redrawn,
        }
    }

    pub fn channel(&self, i: usize) -> MCEstimate {
        self.with_value(self.means[i], self.cov(i, i))
    }

    /// `Σ c_i mean_i` with its exact variance under the sample covariance.
    pub fn linear(&self, coefficients: &[f64]) -> MCEstimate {
        let k = self.channels();
        let value = (0..k).map(|i| coefficients[i] * self.means[i]).sum();
        let mut var = 0.0;
        for i in 0..k {
            for j in 0..k {
                var += coefficients[i] * coefficients[j] * self.cov(i, j);
            }
        }
        self.with_value(value, var)
    }

    /// `mean_a - mean_b` with paired variance.
    pub fn difference(&self, a: usize, b: usize) -> MCEstimate {
        let mut c = vec![0.0; self.channels()];
        c[a] += 1.0;
        c[b] -= 1.0;
        self.linear(&c)
    }

    /// Ratio `mean_num / mean_den` with delta-method error. The denominator
    /// must be resolved from zero by more than three standard errors.
    pub fn ratio(&self, num: usize, den: usize) -> Result<MCEstimate, McError> {
        let (a, b) = (self.means[num], self.means[den]);
        let sb = self.cov(den, den).max(0.0).sqrt();
        if b.abs() <= 3.0 * sb || b == 0.0 {
            return Err(McError::DegenerateNormalization { value: b, stderr: sb });
        }
        let r = a / b;
        let var = (self.cov(num, num) - 2.0 * r * self.cov(num, den) + r * r * self.cov(den, den)) / (b * b);
        Ok(self.with_value(r, var))
    }

    /// Sum of two statistically independent estimates of the same channels.
    pub fn add_independent(&self, other: &ChannelEstimate) -> ChannelEstimate {
        ChannelEstimate {
            means: self.means.iter().zip(&other.means).map(|(a, b)| a + b).collect(),
            covariance: self.covariance.iter().zip(&other.covariance).map(|(a, b)| a + b).collect(),
            n_samples: self.n_samples + other.n_samples,
            seed: self.seed,
            rejected: self.rejected + other.rejected,
            redrawn: self.redrawn + other.redrawn,
        }
    }

    pub fn scaled(&self, c: f64) -> ChannelEstimate {
        let mut out = self.clone();
        out.means.iter_mut().for_each(|m| *m *= c);
        out.covariance.iter_mut().for_each(|v| *v *= c * c);
        out
    }

    pub fn zero(channels: usize, seed: u64) -> ChannelEstimate {
        ChannelEstimate {
            means: vec![0.0; channels],
            covariance: vec![0.0; channels * channels],
            n_samples: 0,
            seed,
            rejected: 0,
            redrawn: 0,
        }
    }
}

/// Averages `f` over `n_samples` draws from the product of `slots`.
///
/// `f` writes the channel values of one sample into a zeroed buffer. Work is
/// split into chunks of [`CHUNK`] samples, chunk `c` drawing from stream
/// `(seed, domain, c)`; summaries are merged in chunk order, so the result is
/// bit-identical for any number of worker threads.
pub fn integrate<F>(
    slots: &[SlotLaw],
    n_samples: u64,
    seed: u64,
    domain: &str,
    channels: usize,
    f: F,
) -> Result<ChannelEstimate, McError>
where
    F: Fn(&SampleView, &mut [f64]) -> Result<SampleStatus, Reject> + Sync,
{
    if n_samples < 2 {
        return Err(McError::TooFewSamples);
    }
    let chunk = CHUNK as u64;
    let n_chunks = n_samples.div_ceil(chunk);
    let summaries: Vec<Result<Moments, McError>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, domain, c);
            let count = chunk.min(n_samples - c * chunk);
            let mut m = Moments::new(channels);
            let mut points = vec![PhasePoint::new([0.0; 3], [0.0; 3]); slots.len()];
            let mut dens = vec![0.0; slots.len()];
            let mut values = vec![0.0; channels];
            let mut delta = vec![0.0; channels];
            for _ in 0..count {
                let mut streak = 0;
                loop {
                    for (i, slot) in slots.iter().enumerate() {
                        let (x, d) = slot.sample(&mut rng);
                        points[i] = x;
                        dens[i] = d;
                    }
                    values.iter_mut().for_each(|v| *v = 0.0);
                    let view = SampleView {
                        points: &points,
                        densities: &dens,
                    };
                    match f(&view, &mut values) {
                        Ok(status) if values.iter().all(|v| v.is_finite()) => {
                            if status == SampleStatus::Zeroed {
                                m.rejected += 1;
                                values.iter_mut().for_each(|v| *v = 0.0);
                            }
                            m.push(&values, &mut delta);
                            break;
                        }
                        Ok(_) | Err(Reject::NonFinite) | Err(Reject::Pathology) => m.redrawn += 1,
                        Err(Reject::Overlap) => m.rejected += 1,
                    }
                    streak += 1;
                    if streak >= MAX_REDRAW_STREAK {
                        return Err(McError::TooManyRedraws(streak));
                    }
                }
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(channels);
    for s in summaries {
        total = total.merge(&s?);
    }
    let n = total.n as f64;
    let covariance = total.comoment.iter().map(|c| c / ((n - 1.0) * n)).collect();
    Ok(ChannelEstimate {
        means: total.mean,
        covariance,
        n_samples: total.n,
        seed,
        rejected: total.rejected,
        redrawn: total.redrawn,
    })
}

/// `count` allowed `n`-particle configurations drawn from `spec` (overlapping
/// proposals redrawn), reproducible from `seed`.
pub fn sample_configurations(spec: &SamplingSpec, n: usize, count: usize, seed: u64) -> Vec<Vec<PhasePoint>> {
    let slot = spec.slot();
    let mut rng = stream(seed, "configurations", n as u64);
    (0..count)
        .map(|_| loop {
            let pts: Vec<PhasePoint> = (0..n).map(|_| slot.sample(&mut rng).0).collect();
            if crate::dynamics::is_allowed(&pts, spec.sigma) {
                break pts;
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channel_has_zero_error() {
        let spec = SamplingSpec::default();
        let est = integrate(&[spec.slot()], 5000, 3, "t", 1, |_, out| {
            out[0] = 2.5;
            Ok(SampleStatus::Kept)
        })
        .unwrap();
        assert_eq!(est.channel(0).value, 2.5);
        assert_eq!(est.channel(0).stderr, 0.0);
    }

    #[test]
    fn gaussian_second_moment() {
        let spec = SamplingSpec {
            beta: 2.0,
            ..SamplingSpec::default()
        };
        let est = integrate(&[spec.slot()], 200_000, 11, "m", 1, |s, out| {
            out[0] = dot(s.points[0].p, s.points[0].p);
            Ok(SampleStatus::Kept)
        })
        .unwrap()
        .channel(0);
        assert!((est.value - 1.5).abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn mixture_density_normalizes() {
        let spec = SamplingSpec::gaussian([0.0; 3], 1.0).with_transport(vec![0.0, 2.0]);
        let slot = spec.slot();
        // ∫ (q·density) / density = E[1] and ∫ density = 1: estimate ∫ g for g = Gaussian-Maxwellian
        let est = integrate(&[slot.clone()], 200_000, 5, "n", 1, |s, out| {
            let x = s.points[0];
            let g = maxwellian(x.q, 1.0) * maxwellian(x.p, 1.0);
            out[0] = g / s.densities[0];
            Ok(SampleStatus::Kept)
        })
        .unwrap()
        .channel(0);
        assert!((est.value - 1.0).abs() < 4.0 * est.stderr, "{est:?}");
        let (x, d) = slot.sample(&mut stream(1, "d", 0));
        assert!((slot.density(&x) - d).abs() < 1e-15);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let spec = SamplingSpec::default();
        let run = || {
            integrate(&[spec.slot(), spec.slot()], 10_000, 9, "b", 2, |s, out| {
                out[0] = s.points[0].q[0] * s.points[1].p[2];
                out[1] = s.points[1].q[1];
                Ok(SampleStatus::Kept)
            })
            .unwrap()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(run);
        let multi = run();
        assert_eq!(single, multi);
    }

    #[test]
    fn ratio_of_identical_channels_is_one() {
        let spec = SamplingSpec::default();
        let est = integrate(&[spec.slot()], 4000, 1, "r", 2, |s, out| {
            out[0] = s.points[0].q[0] + 1.0;
            out[1] = out[0];
            Ok(SampleStatus::Kept)
        })
        .unwrap();
        let r = est.ratio(0, 1).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.stderr < 1e-12);
        let zero = integrate(&[spec.slot()], 4000, 1, "r", 2, |s, out| {
            out[0] = 1.0;
            out[1] = s.points[0].p[0];
            Ok(SampleStatus::Kept)
        })
        .unwrap();
        assert!(matches!(zero.ratio(0, 1), Err(McError::DegenerateNormalization { .. })));
    }
}
