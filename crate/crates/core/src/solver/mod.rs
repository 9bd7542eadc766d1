//! Evaluation of the dual and state hierarchy solutions: cumulant expansions,
//! reduced-cumulant forms, the iteration series and their cross-checks.

pub mod checks;
pub mod collision;
pub mod dual;
pub mod iteration;
pub mod output;
pub mod state;

use std::sync::OnceLock;

use thiserror::Error;

use crate::dynamics::{evolve, Configuration, DynamicsError, PhasePoint};
use crate::functionals::McError;
use crate::partition::{cumulant_coefficient, index_partitions};

pub use checks::*;
pub use collision::*;
pub use dual::*;
pub use iteration::*;
pub use output::*;
pub use state::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("evaluation point is a forbidden configuration")]
    ForbiddenPoint,
    #[error("evaluation point has {got} particles, expected {expected}")]
    PointSize { expected: usize, got: usize },
    #[error("trajectory rejected: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("component {needed} exceeds the truncation N_max = {n_max}")]
    Truncation { needed: usize, n_max: usize },
    #[error("{0}")]
    Precondition(String),
}

/// Largest ground set handled by the cached partition tables.
const MAX_CACHED_GROUND: usize = 9;

/// Partitions of `0..n` with their cumulant coefficients.
pub(crate) fn partitions_with_coefficients(n: usize) -> &'static [(Vec<Vec<usize>>, f64)] {
    static TABLE: OnceLock<Vec<Vec<(Vec<Vec<usize>>, f64)>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=MAX_CACHED_GROUND)
            .map(|m| {
                index_partitions(m)
                    .expect("cached ground sizes are within the enumeration cap")
                    .into_iter()
                    .map(|p| {
                        let c = if p.is_empty() { 1.0 } else { cumulant_coefficient(p.len()) as f64 };
                        (p, c)
                    })
                    .collect()
            })
            .collect()
    });
    &table[n]
}

/// Flows of label subsets of one configuration, indexed by bitmask. An entry
/// is `None` when the subset starts in a forbidden configuration, where every
/// group action is zero.
pub(crate) struct SubsetFlows {
    flows: Vec<Option<Vec<PhasePoint>>>,
}

impl SubsetFlows {
    /// Flows of every mask accepted by `wanted` over `t`.
    pub(crate) fn new(
        points: &[PhasePoint],
        sigma: f64,
        t: f64,
        wanted: impl Fn(u32) -> bool,
    ) -> Result<SubsetFlows, DynamicsError> {
        let n = points.len();
        let mut flows = vec![None; 1 << n];
        for mask in 0u32..(1u32 << n) {
            if !wanted(mask) {
                continue;
            }
            let sub: Vec<PhasePoint> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| points[i]).collect();
            if t == 0.0 || sub.is_empty() {
                flows[mask as usize] = Some(sub);
                continue;
            }
            let c = Configuration { sigma, points: sub };
            match evolve(&c, t) {
                Ok(end) => flows[mask as usize] = Some(end.points),
                Err(DynamicsError::Overlap { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(SubsetFlows { flows })
    }

    pub(crate) fn all(points: &[PhasePoint], sigma: f64, t: f64) -> Result<SubsetFlows, DynamicsError> {
        Self::new(points, sigma, t, |_| true)
    }

    pub(crate) fn flow(&self, mask: u32) -> Option<&[PhasePoint]> {
        self.flows[mask as usize].as_deref()
    }

    /// Flowed point of `label` inside the flow of `mask`.
    pub(crate) fn point_in(&self, mask: u32, label: usize) -> Option<PhasePoint> {
        let rank = (mask & ((1u32 << label) - 1)).count_ones() as usize;
        self.flow(mask).map(|f| f[rank])
    }

    /// Points of the labels in `part` (a submask of `mask`) after flowing `mask`.
    pub(crate) fn restrict(&self, mask: u32, part: u32, out: &mut Vec<PhasePoint>) -> bool {
        out.clear();
        let Some(f) = self.flow(mask) else {
            return false;
        };
        let mut rank = 0;
        for i in 0..32 {
            if mask & (1 << i) != 0 {
                if part & (1 << i) != 0 {
                    out.push(f[rank]);
                }
                rank += 1;
            }
        }
        true
    }
}

pub(crate) fn mask_of(labels: impl IntoIterator<Item = usize>) -> u32 {
    labels.into_iter().fold(0, |m, i| m | (1 << i))
}

pub(crate) fn check_point(points: &[PhasePoint], expected: usize, sigma: f64) -> Result<(), SolverError> {
    if points.len() != expected {
        return Err(SolverError::PointSize {
            expected,
            got: points.len(),
        });
    }
    if !crate::dynamics::is_allowed(points, sigma) {
        return Err(SolverError::ForbiddenPoint);
    }
    Ok(())
}
