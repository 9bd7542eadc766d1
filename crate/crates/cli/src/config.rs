use std::path::{Path, PathBuf};

use anyhow::Context;
use bbgky_core::dynamics::PhasePoint;
use bbgky_core::functionals::library::{ObservableSpec, StateSpec};
use bbgky_core::functionals::{sample_configurations, PositionLaw, SamplingSpec};
use bbgky_core::quadrature::SphereRule;
use bbgky_core::solver::{CollisionKernelSpec, StateRoute, TimeQuadrature};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// How `evolve-dual` evaluates `B_s(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualMethod {
    Partition,
    Reduced,
    Direct,
    /// Closed form for `(0, b₁, 0, …)`.
    Additive,
    /// Closed form for a single non-zero component.
    Kary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub blocks: usize,
    pub delta: i128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Truncation of every sequence.
    #[serde(rename = "N_max")]
    pub big_n_max: usize,
    pub sigma: f64,
    #[serde(rename = "L")]
    pub box_len: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub seed: u64,
    pub n_samples: u64,
    /// Series truncation; the complete series `N_max - s` when absent.
    pub n_max: Option<usize>,
    pub times: Vec<f64>,
    /// Components `s` to evaluate.
    pub components: Vec<usize>,
    pub points_file: Option<PathBuf>,
    /// Random evaluation points when no file is given.
    pub n_points: usize,
    pub positions: PositionLaw,
    pub observable: ObservableSpec,
    pub dual_method: DualMethod,
    pub state: StateSpec,
    pub state_route: StateRoute,
    pub kernel: CollisionKernelSpec,
    pub time_quadrature: TimeQuadrature,
    /// Agreement threshold in standard errors.
    pub tolerance_sigmas: f64,
    /// Negative control for `verify-algebra` only.
    pub corrupt_coefficient: Option<Corruption>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            big_n_max: 4,
            sigma: 1.0,
            box_len: 10.0,
            beta: 1.0,
            gamma: 0.3,
            alpha: 3.0,
            seed: 1,
            n_samples: 100_000,
            n_max: None,
            times: vec![0.1, 0.5, 1.0],
            components: vec![1, 2],
            points_file: None,
            n_points: 8,
            positions: PositionLaw::Gaussian {
                center: [0.0; 3],
                std: 1.0,
            },
            observable: ObservableSpec::ReducedNumber,
            dual_method: DualMethod::Partition,
            state: StateSpec::GaussianProduct {
                center: [0.0; 3],
                width: 1.0,
                beta: 1.0,
                weights: vec![0.0, 1.0, 1.0, 1.0],
            },
            state_route: StateRoute::Cumulant,
            kernel: CollisionKernelSpec {
                sphere: SphereRule::HemisphereProduct { n_polar: 4, n_azimuth: 8 },
                ..CollisionKernelSpec::default()
            },
            time_quadrature: TimeQuadrature::default(),
            tolerance_sigmas: 3.0,
            corrupt_coefficient: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsFile {
    Bare(Vec<Vec<PhasePoint>>),
    Wrapped { points: Vec<Vec<PhasePoint>> },
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let bad = |m: String| Err(UsageError(m).into());
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.box_len > 0.0) || !(self.beta > 0.0) {
            return bad("L and beta must be positive".into());
        }
        if self.big_n_max == 0 || self.big_n_max > 8 {
            return bad(format!("N_max must lie in 1..=8, got {}", self.big_n_max));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return bad("times must be finite".into());
        }
        if self.components.iter().any(|&s| s == 0 || s > self.big_n_max) {
            return bad(format!("components must lie in 1..=N_max ({})", self.big_n_max));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        Ok(())
    }

    /// Warnings for parameters outside the convergence conditions.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let e = std::f64::consts::E;
        if self.gamma >= 1.0 / e {
            out.push(format!(
                "gamma = {} is not below 1/e; convergence of the observable cumulant series is not guaranteed",
                self.gamma
            ));
        }
        if self.alpha <= e {
            out.push(format!(
                "alpha = {} is not above e; convergence of the state cumulant series is not guaranteed",
                self.alpha
            ));
        }
        out
    }

    pub fn sampling(&self) -> SamplingSpec {
        SamplingSpec {
            sigma: self.sigma,
            box_len: self.box_len,
            beta: self.beta,
            positions: self.positions.clone(),
            ..SamplingSpec::default()
        }
    }

    /// Evaluation configurations with at least `min_len` particles each.
    pub fn points(&self, min_len: usize) -> anyhow::Result<Vec<Vec<PhasePoint>>> {
        let points = match &self.points_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("cannot read points file {}: {e}", path.display())))?;
                let parsed: PointsFile = serde_json::from_str(&text)
                    .map_err(|e| UsageError(format!("invalid points file {}: {e}", path.display())))?;
                match parsed {
                    PointsFile::Bare(p) | PointsFile::Wrapped { points: p } => p,
                }
            }
            None => sample_configurations(&self.sampling(), min_len, self.n_points, self.seed),
        };
        if let Some((i, short)) = points.iter().enumerate().find(|(_, p)| p.len() < min_len) {
            return Err(UsageError(format!(
                "point {i} has {} particles but component {min_len} was requested",
                short.len()
            ))
            .into());
        }
        Ok(points)
    }

    pub fn echo(&self) -> anyhow::Result<serde_json::Value> {
        serde_json::to_value(self).context("serializing the configuration")
    }
}
