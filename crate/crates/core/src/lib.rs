//! Cumulant-expansion solutions of the BBGKY hierarchy and its dual for
//! systems of hard spheres.

pub mod algebra;
pub mod partition;
pub mod dynamics;
pub mod rng;
pub mod quadrature;
pub mod functionals;
pub mod solver;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
