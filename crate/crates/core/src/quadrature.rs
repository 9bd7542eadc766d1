//! Deterministic quadrature rules: Gauss–Legendre on intervals and on the
//! time simplex, and sphere rules for the collision integral.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::dynamics::{add, dot, norm, scale, Vec3};

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n).expect("at least one quadrature node");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Nodes `(t1, t2)` with `0 < t2 < t1 < t` and weights for the 2-simplex,
/// via the collapsed map `t1 = t u`, `t2 = t u v` (Jacobian `t² u`).
pub fn simplex2(n: usize, t: f64) -> Vec<((f64, f64), f64)> {
    let rule = gauss_legendre(n, 0.0, 1.0);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &rule {
        for &(v, wv) in &rule {
            out.push(((t * u, t * u * v), wu * wv * t * t * u));
        }
    }
    out
}

/// Quadrature over the unit sphere restricted to the hemisphere `<η, axis> > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereRule {
    /// 26-point degree-7 rule on the full sphere, masked to the hemisphere.
    Lebedev26,
    /// Product rule aligned with the axis: Gauss–Legendre in `cos θ ∈ (0, 1)`,
    /// trapezoid in the azimuth.
    HemisphereProduct { n_polar: usize, n_azimuth: usize },
}

impl Default for SphereRule {
    fn default() -> Self {
        SphereRule::Lebedev26
    }
}

fn lebedev26() -> Vec<(Vec3, f64)> {
    let mut out = Vec::with_capacity(26);
    let (w_axis, w_edge, w_corner) = (1.0 / 21.0, 4.0 / 105.0, 9.0 / 280.0);
    for k in 0..3 {
        for sgn in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[k] = sgn;
            out.push((v, w_axis));
        }
    }
    let r2 = 1.0 / 2f64.sqrt();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for sa in [1.0, -1.0] {
            for sb in [1.0, -1.0] {
                let mut v = [0.0; 3];
                v[a] = sa * r2;
                v[b] = sb * r2;
                out.push((v, w_edge));
            }
        }
    }
    let r3 = 1.0 / 3f64.sqrt();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                out.push(([sx * r3, sy * r3, sz * r3], w_corner));
            }
        }
    }
    out.into_iter().map(|(v, w)| (v, 4.0 * PI * w)).collect()
}

/// Orthonormal pair completing the unit vector `a`.
pub fn orthonormal_frame(a: Vec3) -> (Vec3, Vec3) {
    let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let along = dot(helper, a);
    let e1 = add(helper, scale(a, -along));
    let e1 = scale(e1, 1.0 / norm(e1));
    let e2 = [
        a[1] * e1[2] - a[2] * e1[1],
        a[2] * e1[0] - a[0] * e1[2],
        a[0] * e1[1] - a[1] * e1[0],
    ];
    (e1, e2)
}

impl SphereRule {
    /// Nodes on `{η : |η| = 1, <η, axis> > 0}`; `axis` need not be normalized.
    /// Returns nothing for a zero axis.
    pub fn hemisphere(&self, axis: Vec3) -> Vec<(Vec3, f64)> {
        let len = norm(axis);
        if !(len > 0.0) {
            return Vec::new();
        }
        let a = scale(axis, 1.0 / len);
        match *self {
            SphereRule::Lebedev26 => lebedev26().into_iter().filter(|(v, _)| dot(*v, a) > 0.0).collect(),
            SphereRule::HemisphereProduct { n_polar, n_azimuth } => {
                let (e1, e2) = orthonormal_frame(a);
                let dphi = 2.0 * PI / n_azimuth as f64;
                let mut out = Vec::with_capacity(n_polar * n_azimuth);
                for (c, wc) in gauss_legendre(n_polar, 0.0, 1.0) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for k in 0..n_azimuth {
                        let phi = (k as f64 + 0.5) * dphi;
                        let v = add(scale(a, c), add(scale(e1, s * phi.cos()), scale(e2, s * phi.sin())));
                        out.push((v, wc * dphi));
                    }
                }
                out
            }
        }
    }

    /// All nodes of the full-sphere rule (weights sum to `4π`).
    pub fn full_sphere(&self) -> Vec<(Vec3, f64)> {
        match *self {
            SphereRule::Lebedev26 => lebedev26(),
            SphereRule::HemisphereProduct { .. } => {
                let up = self.hemisphere([0.0, 0.0, 1.0]);
                let down = self.hemisphere([0.0, 0.0, -1.0]);
                up.into_iter().chain(down).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(4, 0.0, 2.0);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(7)).sum();
        assert!((integral - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_area_and_moment() {
        let rule = simplex2(6, 2.0);
        let area: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((area - 2.0).abs() < 1e-12);
        // ∫∫_{0<t2<t1<T} t1 t2 = T⁴/8
        let m: f64 = rule.iter().map(|&((a, b), w)| w * a * b).sum();
        assert!((m - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lebedev_is_degree_seven() {
        let nodes = lebedev26();
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        // ∫ x⁴ dΩ = 4π/5, ∫ x² y² z² dΩ = 4π/105
        let x4: f64 = nodes.iter().map(|(v, w)| w * v[0].powi(4)).sum();
        assert!((x4 - 4.0 * PI / 5.0).abs() < 1e-12);
        let xyz: f64 = nodes.iter().map(|(v, w)| w * (v[0] * v[1] * v[2]).powi(2)).sum();
        assert!((xyz - 4.0 * PI / 105.0).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_product_moments() {
        let rule = SphereRule::HemisphereProduct { n_polar: 6, n_azimuth: 12 };
        let axis = [0.3, -1.0, 0.5];
        let nodes = rule.hemisphere(axis);
        let a = scale(axis, 1.0 / norm(axis));
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        // ∫_{hemisphere} <η, a> dΩ = π
        let flux: f64 = nodes.iter().map(|(v, w)| w * dot(*v, a)).sum();
        assert!((flux - PI).abs() < 1e-12);
        assert!(nodes.iter().all(|(v, _)| (norm(*v) - 1.0).abs() < 1e-12 && dot(*v, a) > 0.0));
        assert!(rule.hemisphere([0.0; 3]).is_empty());
    }
}
