//! Sequences of labeled operators under the ⋆-product (subset convolution).

use super::{AlgebraError, FormalSum, OperatorSymbol, Side};
use crate::partition::{factorial, ClusterElement, Label};

/// Component `n` is a formal sum acting on the labels `1..=n`.
/// Only the unit carries a non-zero 0-component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorSequence {
    components: Vec<FormalSum>,
}

impl OperatorSequence {
    pub fn zero(n_max: usize) -> Self {
        OperatorSequence {
            components: vec![FormalSum::zero(); n_max + 1],
        }
    }

    /// `I = (1, 0, 0, ...)`.
    pub fn identity(n_max: usize) -> Self {
        let mut seq = OperatorSequence::zero(n_max);
        seq.components[0] = FormalSum::one();
        seq
    }

    /// `(0, S(1), S(1,2), ..., S(1..n_max))`.
    pub fn groups(side: Side, n_max: usize) -> Self {
        let mut seq = OperatorSequence::zero(n_max);
        for n in 1..=n_max {
            seq.components[n] = FormalSum::symbol(OperatorSymbol::group(side, (1..=n as u32).map(Label)));
        }
        seq
    }

    pub fn from_components(components: Vec<FormalSum>) -> Self {
        assert!(!components.is_empty(), "a sequence has at least the 0-component");
        OperatorSequence { components }
    }

    pub fn n_max(&self) -> usize {
        self.components.len() - 1
    }

    pub fn component(&self, n: usize) -> &FormalSum {
        &self.components[n]
    }

    pub fn components(&self) -> &[FormalSum] {
        &self.components
    }

    pub fn set_component(&mut self, n: usize, value: FormalSum) {
        self.components[n] = value;
    }

    pub fn add(&self, other: &OperatorSequence) -> Result<OperatorSequence, AlgebraError> {
        if self.n_max() != other.n_max() {
            return Err(AlgebraError::TruncationMismatch(self.n_max(), other.n_max()));
        }
        let mut out = self.clone();
        for (a, b) in out.components.iter_mut().zip(&other.components) {
            a.add_assign(b);
        }
        Ok(out)
    }

    fn check_integral(&self) -> Result<(), AlgebraError> {
        for (n, c) in self.components.iter().enumerate() {
            if let Err((m, coef)) = c.integer_terms() {
                return Err(AlgebraError::NonIntegral {
                    component: n,
                    monomial: m.to_string(),
                    coefficient: coef.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Places component `|labels|` of a sequence on the given labels, order-preserving.
fn place(component: &FormalSum, labels: &[Label]) -> FormalSum {
    if labels.is_empty() {
        return component.clone();
    }
    let owned = labels.to_vec();
    component.relabel(&move |l: Label| ClusterElement::Single(owned[(l.0 - 1) as usize]))
}

/// `(u⋆v)_s(1..s) = Σ_{Y⊆(1..s)} u_{|Y|}(Y) v_{s-|Y|}((1..s)∖Y)`.
pub fn star_product(
    u: &OperatorSequence,
    v: &OperatorSequence,
) -> Result<OperatorSequence, AlgebraError> {
    if u.n_max() != v.n_max() {
        return Err(AlgebraError::TruncationMismatch(u.n_max(), v.n_max()));
    }
    let n_max = u.n_max();
    let mut out = OperatorSequence::zero(n_max);
    for s in 0..=n_max {
        let mut acc = FormalSum::zero();
        for mask in 0u32..(1u32 << s) {
            let (inside, outside): (Vec<Label>, Vec<Label>) = (1..=s as u32)
                .map(Label)
                .partition(|l| mask & (1 << (l.0 - 1)) != 0);
            let left = u.component(inside.len());
            let right = v.component(outside.len());
            if left.is_zero() || right.is_zero() {
                continue;
            }
            acc.add_assign(&place(left, &inside).mul(&place(right, &outside)));
        }
        out.components[s] = acc;
    }
    Ok(out)
}

fn require_zero_unit(u: &OperatorSequence) -> Result<(), AlgebraError> {
    if u.component(0).is_zero() {
        Ok(())
    } else {
        Err(AlgebraError::NonZeroUnitComponent)
    }
}

/// `Exp⋆ u = I + Σ_{n≥1} u^{⋆n}/n!`, truncated at the sequence order.
pub fn exp_star(u: &OperatorSequence) -> Result<OperatorSequence, AlgebraError> {
    require_zero_unit(u)?;
    let n_max = u.n_max();
    let mut result = OperatorSequence::identity(n_max);
    let mut power = OperatorSequence::identity(n_max);
    for n in 1..=n_max {
        power = star_product(&power, u)?;
        let inv = num_rational::BigRational::new(1.into(), factorial(n).into());
        for (r, p) in result.components.iter_mut().zip(&power.components) {
            r.add_scaled(p, &inv);
        }
    }
    result.check_integral()?;
    Ok(result)
}

/// `Ln⋆(I + w) = Σ_{n≥1} (-1)^{n-1} w^{⋆n}/n`, with `w` the part without the unit.
pub fn ln_star(w: &OperatorSequence) -> Result<OperatorSequence, AlgebraError> {
    require_zero_unit(w)?;
    let n_max = w.n_max();
    let mut result = OperatorSequence::zero(n_max);
    let mut power = OperatorSequence::identity(n_max);
    for n in 1..=n_max {
        power = star_product(&power, w)?;
        let sign = if n % 2 == 1 { 1 } else { -1 };
        let factor = num_rational::BigRational::new(sign.into(), (n as i64).into());
        for (r, p) in result.components.iter_mut().zip(&power.components) {
            r.add_scaled(p, &factor);
        }
    }
    result.check_integral()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{int, SymbolKind};

    fn a_symbol(n: u32) -> FormalSum {
        FormalSum::symbol(OperatorSymbol::cumulant(
            Side::Dual,
            (1..=n).map(|l| ClusterElement::Single(Label(l))).collect(),
        ))
    }

    #[test]
    fn star_of_first_components() {
        let mut u = OperatorSequence::zero(3);
        u.set_component(1, a_symbol(1));
        let uu = star_product(&u, &u).unwrap();
        let a1 = |l| {
            FormalSum::symbol(OperatorSymbol::cumulant(Side::Dual, vec![ClusterElement::Single(Label(l))]))
        };
        assert_eq!(uu.component(2), &a1(1).mul(&a1(2)).scaled(&int(2)));
        assert!(uu.component(1).is_zero());
        assert!(uu.component(3).is_zero());
    }

    #[test]
    fn identity_is_unit() {
        let s = OperatorSequence::groups(Side::Dual, 4);
        let id = OperatorSequence::identity(4);
        assert_eq!(star_product(&s, &id).unwrap(), s);
        assert_eq!(star_product(&id, &s).unwrap(), s);
    }

    #[test]
    fn star_commutes() {
        let s = OperatorSequence::groups(Side::Dual, 4);
        let mut u = OperatorSequence::zero(4);
        u.set_component(1, a_symbol(1));
        u.set_component(2, a_symbol(2));
        assert_eq!(star_product(&s, &u).unwrap(), star_product(&u, &s).unwrap());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = OperatorSequence::zero(4);
        assert_eq!(exp_star(&z).unwrap(), OperatorSequence::identity(4));
        assert_eq!(ln_star(&z).unwrap(), OperatorSequence::zero(4));
    }

    #[test]
    fn exp_second_component() {
        let mut u = OperatorSequence::zero(2);
        u.set_component(1, a_symbol(1));
        let e = exp_star(&u).unwrap();
        let a1 = |l| {
            FormalSum::symbol(OperatorSymbol::cumulant(Side::Dual, vec![ClusterElement::Single(Label(l))]))
        };
        assert_eq!(e.component(2), &a1(1).mul(&a1(2)));
    }

    #[test]
    fn low_order_logarithm() {
        let s = OperatorSequence::groups(Side::Dual, 3);
        let ln = ln_star(&s).unwrap();
        let g = |ls: &[u32]| FormalSum::symbol(OperatorSymbol::group(Side::Dual, ls.iter().map(|&l| Label(l))));
        assert_eq!(ln.component(1), &g(&[1]));
        assert_eq!(ln.component(2), &g(&[1, 2]).sub(&g(&[1]).mul(&g(&[2]))));
        assert_eq!(ln.component(3).len(), 5);
        assert!(ln
            .component(3)
            .iter()
            .flat_map(|(m, _)| m.factors())
            .all(|f| f.kind() == SymbolKind::Group));
    }

    #[test]
    fn unit_component_rejected() {
        let id = OperatorSequence::identity(2);
        assert_eq!(exp_star(&id), Err(AlgebraError::NonZeroUnitComponent));
    }
}
