//! Concrete observables and states for tests and runs: smooth bumps times
//! polynomials, Gaussian–Maxwellian profiles, and product-form states.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mc::{maxwellian, SamplingSpec};
use super::{phase_fn, ObservableSeq, PhaseFn, StateSeq};
use crate::dynamics::{dot, is_allowed, norm, sub, PhasePoint, Vec3};

/// `exp(1 - 1/(1 - r²))` on `r < 1`, else 0; maximum 1 at `r = 0`.
pub fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Single-particle building blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OneBody {
    Constant,
    /// `bump(|q-c|/R) e^{-|p|²/2}`.
    Bump { center: Vec3, radius: f64 },
    /// `bump(|q-c|/R) <a, p> e^{-|p|²/2}`.
    LinearBump { center: Vec3, radius: f64, slope: Vec3 },
    /// `exp(-|q-c|²/2w² - β|p|²/2)`.
    GaussianMaxwellian { center: Vec3, width: f64, beta: f64 },
    /// `|p|²/2`; unbounded.
    KineticEnergy,
}

impl OneBody {
    pub fn eval(&self, x: &PhasePoint) -> f64 {
        match self {
            OneBody::Constant => 1.0,
            OneBody::Bump { center, radius } => bump(norm(sub(x.q, *center)) / radius) * (-0.5 * dot(x.p, x.p)).exp(),
            OneBody::LinearBump { center, radius, slope } => {
                bump(norm(sub(x.q, *center)) / radius) * dot(*slope, x.p) * (-0.5 * dot(x.p, x.p)).exp()
            }
            OneBody::GaussianMaxwellian { center, width, beta } => {
                let d = sub(x.q, *center);
                (-dot(d, d) / (2.0 * width * width) - 0.5 * beta * dot(x.p, x.p)).exp()
            }
            OneBody::KineticEnergy => 0.5 * dot(x.p, x.p),
        }
    }

    /// Exact `sup |φ|` over one-particle phase space.
    pub fn sup(&self) -> f64 {
        match self {
            OneBody::Constant | OneBody::Bump { .. } | OneBody::GaussianMaxwellian { .. } => 1.0,
            // max of s e^{-s²/2} is at s = 1
            OneBody::LinearBump { slope, .. } => norm(*slope) * (-0.5f64).exp(),
            OneBody::KineticEnergy => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Product,
    Sum,
}

fn one() -> f64 {
    1.0
}

/// Symmetric k-particle function `a Π φ(x_i)` or `a Σ φ(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub one_body: OneBody,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub combine: Combine,
}

impl TestFunction {
    pub fn new(one_body: OneBody) -> Self {
        TestFunction {
            one_body,
            amplitude: 1.0,
            combine: Combine::Product,
        }
    }

    pub fn scaled(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn summed(mut self) -> Self {
        self.combine = Combine::Sum;
        self
    }

    pub fn eval(&self, x: &[PhasePoint]) -> f64 {
        let a = self.amplitude;
        match self.combine {
            Combine::Product => a * x.iter().map(|p| self.one_body.eval(p)).product::<f64>(),
            Combine::Sum => a * x.iter().map(|p| self.one_body.eval(p)).sum::<f64>(),
        }
    }

    pub fn to_phase_fn(&self) -> PhaseFn {
        let f = self.clone();
        phase_fn(move |x| f.eval(x))
    }

    /// Upper bound on `sup |b_k|` (exact without the hard-core constraint).
    pub fn sup_bound(&self, k: usize) -> f64 {
        let s = self.one_body.sup();
        let a = self.amplitude.abs();
        match self.combine {
            Combine::Product => a * s.powi(k as i32),
            Combine::Sum => a * k as f64 * s,
        }
    }

    /// A random smooth bounded function centered within `spread` of `origin`.
    pub fn random<R: Rng>(rng: &mut R, origin: Vec3, spread: f64) -> Self {
        let around = |r: &mut R| -> Vec3 {
            [
                origin[0] + spread * r.gen_range(-1.0..1.0),
                origin[1] + spread * r.gen_range(-1.0..1.0),
                origin[2] + spread * r.gen_range(-1.0..1.0),
            ]
        };
        let center = around(rng);
        let one_body = match rng.gen_range(0..3) {
            0 => OneBody::Bump {
                center,
                radius: rng.gen_range(2.0..4.0),
            },
            1 => OneBody::LinearBump {
                center,
                radius: rng.gen_range(2.0..4.0),
                slope: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            },
            _ => OneBody::GaussianMaxwellian {
                center,
                width: rng.gen_range(1.0..2.5),
                beta: rng.gen_range(0.5..1.5),
            },
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        TestFunction::new(one_body).scaled(sign * rng.gen_range(0.5..1.5))
    }
}

/// The fixed library of bounded test functions near `origin`.
pub fn test_library(origin: Vec3) -> Vec<TestFunction> {
    let off = |d: Vec3| [origin[0] + d[0], origin[1] + d[1], origin[2] + d[2]];
    vec![
        TestFunction::new(OneBody::Constant),
        TestFunction::new(OneBody::Bump {
            center: origin,
            radius: 2.0,
        }),
        TestFunction::new(OneBody::Bump {
            center: off([1.0, -0.5, 0.0]),
            radius: 3.5,
        })
        .scaled(-0.7),
        TestFunction::new(OneBody::LinearBump {
            center: off([0.0, 0.5, -0.5]),
            radius: 3.0,
            slope: [1.0, 0.0, 0.5],
        }),
        TestFunction::new(OneBody::GaussianMaxwellian {
            center: origin,
            width: 1.5,
            beta: 1.0,
        }),
        TestFunction::new(OneBody::GaussianMaxwellian {
            center: off([-1.0, 0.0, 1.0]),
            width: 1.0,
            beta: 0.5,
        })
        .summed(),
    ]
}

/// Initial observables by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    Unit,
    /// Full number observable `(0, 1, 2, …)`.
    Number,
    /// `N⁽¹⁾ = (0, 1, 0, …)`.
    ReducedNumber,
    /// `(0, b₁, 0, …)`.
    Additive { function: TestFunction },
    /// Only component `k` non-zero.
    Kary { k: usize, function: TestFunction },
    Components { components: Vec<Option<TestFunction>> },
}

impl ObservableSpec {
    pub fn build(&self, sigma: f64, n_max: usize) -> ObservableSeq {
        match self {
            ObservableSpec::Unit => ObservableSeq::unit(sigma, n_max),
            ObservableSpec::Number => ObservableSeq::number(sigma, n_max),
            ObservableSpec::ReducedNumber => ObservableSeq::reduced_number(sigma, n_max),
            ObservableSpec::Additive { function } => ObservableSpec::Kary {
                k: 1,
                function: function.clone(),
            }
            .build(sigma, n_max),
            ObservableSpec::Kary { k, function } => {
                let seq = ObservableSeq::zero(sigma, n_max);
                if *k <= n_max {
                    seq.with_component(*k, function.to_phase_fn())
                } else {
                    seq
                }
            }
            ObservableSpec::Components { components } => {
                let mut seq = ObservableSeq::zero(sigma, n_max);
                for (n, c) in components.iter().enumerate().take(n_max + 1) {
                    seq.set_component(n, c.as_ref().map(TestFunction::to_phase_fn));
                }
                seq
            }
        }
    }
}

/// Normalized one-particle profile `N(c, w²)(q) · M_β(p)`.
pub fn gaussian_profile(center: Vec3, width: f64, beta: f64) -> impl Fn(&PhasePoint) -> f64 + Clone + Send + Sync {
    move |x: &PhasePoint| {
        let d = sub(x.q, center);
        let v = width * width;
        (-dot(d, d) / (2.0 * v)).exp() / (2.0 * PI * v).powf(1.5) * maxwellian(x.p, beta)
    }
}

/// `Π h(x_i) · 1_allowed` for the normalized Gaussian–Maxwellian profile `h`.
pub fn product_density(center: Vec3, width: f64, beta: f64, sigma: f64) -> PhaseFn {
    let h = gaussian_profile(center, width, beta);
    phase_fn(move |x| {
        if is_allowed(x, sigma) {
            x.iter().map(&h).product()
        } else {
            0.0
        }
    })
}

/// Initial states by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    /// `D_n = weights[n] Π h(x_i) 1_allowed` with a Gaussian–Maxwellian `h`;
    /// sampled from the matching proposal.
    GaussianProduct {
        center: Vec3,
        width: f64,
        beta: f64,
        weights: Vec<f64>,
    },
}

impl StateSpec {
    pub fn build(&self, sigma: f64, n_max: usize) -> StateSeq {
        match self {
            StateSpec::GaussianProduct {
                center,
                width,
                beta,
                weights,
            } => {
                let sampling = SamplingSpec {
                    sigma,
                    beta: *beta,
                    ..SamplingSpec::gaussian(*center, *width)
                };
                let density = product_density(*center, *width, *beta, sigma);
                let mut d = StateSeq::zero(sampling, n_max);
                for (n, &w) in weights.iter().enumerate().take(n_max + 1) {
                    if w != 0.0 {
                        d = d.with_density(n, w, density.clone());
                    }
                }
                d
            }
        }
    }
}
