//! Cumulants, reduced cumulants and their regroupings as formal sums of groups.

use std::cell::RefCell;
use std::collections::BTreeSet;

use super::{int, AlgebraError, FormalSum, Monomial, OperatorSymbol, Side, SymbolKind};
use crate::partition::{
    alternating_factorial, binomial, cumulant_coefficient, enumerate_partitions, index_partitions,
    theta_of, ClusterElement, Label,
};

/// Coefficient attached to a partition with a given number of blocks.
/// `Corrupted` perturbs one block count and exists only as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientRule {
    #[default]
    Standard,
    Corrupted { blocks: usize, delta: i128 },
}

impl CoefficientRule {
    pub fn coefficient(&self, blocks: usize) -> i128 {
        let base = cumulant_coefficient(blocks);
        match *self {
            CoefficientRule::Standard => base,
            CoefficientRule::Corrupted { blocks: b, delta } if b == blocks => base + delta,
            CoefficientRule::Corrupted { .. } => base,
        }
    }
}

fn group_of(side: Side, labels: &BTreeSet<Label>) -> FormalSum {
    if labels.is_empty() {
        FormalSum::one()
    } else {
        FormalSum::symbol(OperatorSymbol::group(side, labels.iter().copied()))
    }
}

/// `Σ_P c(|P|) Π S(θ(X_i))` over partitions of `ground`.
pub fn cumulant_expansion_with(
    side: Side,
    ground: &[ClusterElement],
    rule: &CoefficientRule,
) -> Result<FormalSum, AlgebraError> {
    let mut out = FormalSum::zero();
    for p in enumerate_partitions(ground)? {
        let factors: Vec<OperatorSymbol> = p
            .blocks()
            .iter()
            .map(|b| OperatorSymbol::group(side, theta_of(b)))
            .collect();
        out.add_term(Monomial::new(factors), int(rule.coefficient(p.len())));
    }
    Ok(out)
}

pub fn cumulant_expansion(side: Side, ground: &[ClusterElement]) -> Result<FormalSum, AlgebraError> {
    cumulant_expansion_with(side, ground, &CoefficientRule::Standard)
}

fn check_tuple(s: usize, tuple: &[Label]) -> Result<BTreeSet<Label>, AlgebraError> {
    let set: BTreeSet<Label> = tuple.iter().copied().collect();
    if set.len() != tuple.len() {
        return Err(AlgebraError::InvalidTuple(format!("repeated label in {tuple:?}")));
    }
    if let Some(bad) = set.iter().find(|l| l.0 == 0 || l.0 as usize > s) {
        return Err(AlgebraError::InvalidTuple(format!("label {bad} outside 1..={s}")));
    }
    Ok(set)
}

/// Ground set `({(1..s)∖J}, j_1, ..., j_n)`; `None` when the cluster is empty.
pub(crate) fn dual_ground(s: usize, tuple: &[Label]) -> Result<Option<Vec<ClusterElement>>, AlgebraError> {
    let j = check_tuple(s, tuple)?;
    let rest: BTreeSet<Label> = (1..=s as u32).map(Label).filter(|l| !j.contains(l)).collect();
    if rest.is_empty() {
        return Ok(None);
    }
    let mut ground = vec![ClusterElement::Cluster(rest)];
    ground.extend(tuple.iter().map(|&l| ClusterElement::Single(l)));
    Ok(Some(ground))
}

pub(crate) fn state_ground(s: usize, n: usize) -> Vec<ClusterElement> {
    assert!(s >= 1, "state cumulants need a non-empty cluster");
    let mut ground = vec![ClusterElement::cluster((1..=s as u32).map(Label))];
    ground.extend((s as u32 + 1..=(s + n) as u32).map(|l| ClusterElement::Single(Label(l))));
    ground
}

pub(crate) fn dual_cumulant_with(
    s: usize,
    tuple: &[Label],
    rule: &CoefficientRule,
) -> Result<FormalSum, AlgebraError> {
    match dual_ground(s, tuple)? {
        Some(ground) => cumulant_expansion_with(Side::Dual, &ground, rule),
        // an empty cluster is the identity element, whose cumulants with anything vanish
        None if tuple.is_empty() => Ok(FormalSum::one()),
        None => Ok(FormalSum::zero()),
    }
}

/// `𝔄_{1+n}(t, {(1..s)∖J}, j_1, ..., j_n)` expanded over groups `S`.
pub fn dual_cumulant(s: usize, tuple: &[Label]) -> Result<FormalSum, AlgebraError> {
    dual_cumulant_with(s, tuple, &CoefficientRule::Standard)
}

pub(crate) fn state_cumulant_with(s: usize, n: usize, rule: &CoefficientRule) -> Result<FormalSum, AlgebraError> {
    cumulant_expansion_with(Side::State, &state_ground(s, n), rule)
}

/// `𝔄*_{1+n}(t, {1..s}, s+1, ..., s+n)` expanded over groups `S*`.
pub fn state_cumulant(s: usize, n: usize) -> Result<FormalSum, AlgebraError> {
    state_cumulant_with(s, n, &CoefficientRule::Standard)
}

/// Binomial form of the reduced cumulant.
///
/// Dual: `U_{1+n}({1..s-n}, s-n+1..s) = Σ_k (-1)^k C(n,k) S_{s-k}(1..s-k)`.
/// State: `U*_{1+n}({1..s}, s+1..s+n) = Σ_k (-1)^k C(n,k) S*_{s+n-k}(1..s+n-k)`.
pub fn reduced_cumulant(side: Side, s: usize, n: usize) -> Result<FormalSum, AlgebraError> {
    let top = match side {
        Side::Dual => {
            if n > s {
                return Err(AlgebraError::InvalidTuple(format!("order {n} exceeds {s} labels")));
            }
            s
        }
        Side::State => s + n,
    };
    let mut out = FormalSum::zero();
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let labels: BTreeSet<Label> = (1..=(top - k) as u32).map(Label).collect();
        out.add_scaled(&group_of(side, &labels), &int(sign * binomial(n, k)));
    }
    Ok(out)
}

/// Subset form `Σ_{Y⊆J} (-1)^{|J∖Y|} S(C ∪ Y)`, with `S(∅) = 1`.
pub fn reduced_cumulant_subsets(side: Side, cluster: &BTreeSet<Label>, singles: &[Label]) -> FormalSum {
    let n = singles.len();
    let mut out = FormalSum::zero();
    for mask in 0u32..(1u32 << n) {
        let mut labels = cluster.clone();
        labels.extend((0..n).filter(|i| mask & (1 << i) != 0).map(|i| singles[i]));
        let sign = if (n - mask.count_ones() as usize) % 2 == 0 { 1 } else { -1 };
        out.add_scaled(&group_of(side, &labels), &int(sign));
    }
    out
}

/// The cumulant `𝔄_{1+n}` (dual side, `n ≥ 2`) written over first- and
/// second-order cumulant symbols:
/// `Σ_{Y⊆J, Y≠∅} 𝔄_2({C},{Y}) Σ_{P of J∖Y} (-1)^{|P|} |P|! Π 𝔄_1({X_i})`.
pub fn second_order_reduction(s: usize, tuple: &[Label]) -> Result<FormalSum, AlgebraError> {
    let j = check_tuple(s, tuple)?;
    if tuple.len() < 2 {
        return Err(AlgebraError::InvalidTuple("second-order reduction needs n >= 2".into()));
    }
    let cluster: BTreeSet<Label> = (1..=s as u32).map(Label).filter(|l| !j.contains(l)).collect();
    let mut out = FormalSum::zero();
    if cluster.is_empty() {
        return Ok(out);
    }
    let n = tuple.len();
    for mask in 1u32..(1u32 << n) {
        let y: Vec<Label> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| tuple[i]).collect();
        let rest: Vec<Label> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| tuple[i]).collect();
        let a2 = OperatorSymbol::cumulant(
            Side::Dual,
            vec![ClusterElement::Cluster(cluster.clone()), ClusterElement::cluster(y)],
        );
        for blocks in index_partitions(rest.len())? {
            let mut factors = vec![a2.clone()];
            for b in &blocks {
                factors.push(OperatorSymbol::cumulant(
                    Side::Dual,
                    vec![ClusterElement::cluster(b.iter().map(|&i| rest[i]))],
                ));
            }
            out.add_term(Monomial::new(factors), int(alternating_factorial(blocks.len())));
        }
    }
    Ok(out)
}

/// Expands cumulant and reduced-cumulant symbols into groups.
pub fn expand_symbols(sum: &FormalSum) -> Result<FormalSum, AlgebraError> {
    let failure = RefCell::new(None);
    let out = sum.substitute(|sym| match sym.kind() {
        SymbolKind::Group => FormalSum::symbol(sym.clone()),
        SymbolKind::Cumulant => match cumulant_expansion(sym.side(), sym.args()) {
            Ok(e) => e,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                FormalSum::zero()
            }
        },
        SymbolKind::ReducedCumulant => {
            let mut cluster = BTreeSet::new();
            let mut singles = Vec::new();
            for a in sym.args() {
                match a {
                    ClusterElement::Single(l) => singles.push(*l),
                    ClusterElement::Cluster(c) => cluster.extend(c.iter().copied()),
                }
            }
            reduced_cumulant_subsets(sym.side(), &cluster, &singles)
        }
    });
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Replaces every group acting only on `passive` labels by the identity:
/// integrated-out variables on the state side, variables the observable
/// does not depend on on the dual side.
pub fn drop_groups_within(sum: &FormalSum, passive: &BTreeSet<Label>) -> FormalSum {
    sum.substitute(|sym| {
        if sym.kind() == SymbolKind::Group && sym.labels().is_subset(passive) {
            FormalSum::one()
        } else {
            FormalSum::symbol(sym.clone())
        }
    })
}

/// Replaces first-order cumulants acting only on `passive` labels by the identity.
pub fn drop_first_order_on(sum: &FormalSum, passive: &BTreeSet<Label>) -> FormalSum {
    sum.substitute(|sym| {
        if sym.kind() == SymbolKind::Cumulant && sym.order() == 1 && sym.labels().is_subset(passive) {
            FormalSum::one()
        } else {
            FormalSum::symbol(sym.clone())
        }
    })
}

/// Uses the symmetry of the function acted on: a group on `{1..m} ∪ Y`
/// becomes the group on `1..m+|Y|`.
pub fn canonicalize_groups(sum: &FormalSum, fixed: usize) -> FormalSum {
    let head: BTreeSet<Label> = (1..=fixed as u32).map(Label).collect();
    sum.substitute(|sym| {
        let labels = sym.labels();
        if sym.kind() == SymbolKind::Group && head.is_subset(&labels) {
            FormalSum::symbol(OperatorSymbol::group(sym.side(), (1..=labels.len() as u32).map(Label)))
        } else {
            FormalSum::symbol(sym.clone())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::bell;

    fn labels(ls: &[u32]) -> Vec<Label> {
        ls.iter().map(|&l| Label(l)).collect()
    }

    fn g(side: Side, ls: &[u32]) -> FormalSum {
        FormalSum::symbol(OperatorSymbol::group(side, labels(ls)))
    }

    #[test]
    fn first_dual_cumulants() {
        assert_eq!(dual_cumulant(3, &[]).unwrap(), g(Side::Dual, &[1, 2, 3]));
        let a2 = dual_cumulant(2, &labels(&[2])).unwrap();
        assert_eq!(a2, g(Side::Dual, &[1, 2]).sub(&g(Side::Dual, &[1]).mul(&g(Side::Dual, &[2]))));
        let a3 = dual_cumulant(3, &labels(&[2, 3])).unwrap();
        assert_eq!(a3.coefficient_multiset(), vec![-1, -1, -1, 1, 2]);
    }

    #[test]
    fn first_state_cumulants() {
        assert_eq!(state_cumulant(2, 0).unwrap(), g(Side::State, &[1, 2]));
        let a2 = state_cumulant(2, 1).unwrap();
        assert_eq!(a2, g(Side::State, &[1, 2, 3]).sub(&g(Side::State, &[1, 2]).mul(&g(Side::State, &[3]))));
        assert_eq!(state_cumulant(1, 2).unwrap().coefficient_multiset(), vec![-1, -1, -1, 1, 2]);
    }

    #[test]
    fn monomial_counts_are_bell() {
        for s in 1..=5 {
            for n in 0..s {
                let tuple: Vec<Label> = (s as u32 - n as u32 + 1..=s as u32).map(Label).collect();
                assert_eq!(dual_cumulant(s, &tuple).unwrap().len() as u128, bell(n + 1));
            }
        }
    }

    #[test]
    fn tuple_validation() {
        assert!(dual_cumulant(2, &labels(&[3])).is_err());
        assert!(dual_cumulant(3, &labels(&[2, 2])).is_err());
        assert!(dual_cumulant(2, &labels(&[1, 2])).unwrap().is_zero());
    }

    #[test]
    fn reduced_binomial_forms() {
        assert_eq!(reduced_cumulant(Side::Dual, 3, 0).unwrap(), g(Side::Dual, &[1, 2, 3]));
        assert_eq!(
            reduced_cumulant(Side::State, 1, 1).unwrap(),
            g(Side::State, &[1, 2]).sub(&g(Side::State, &[1]))
        );
        let u3 = reduced_cumulant(Side::State, 1, 2).unwrap();
        let mut expected = g(Side::State, &[1, 2, 3]);
        expected.add_scaled(&g(Side::State, &[1, 2]), &int(-2));
        expected.add_assign(&g(Side::State, &[1]));
        assert_eq!(u3, expected);
    }

    #[test]
    fn regrouped_state_cumulant_is_reduced() {
        for s in 1..=3 {
            for n in 0..=3 {
                let passive: BTreeSet<Label> = (s as u32 + 1..=(s + n) as u32).map(Label).collect();
                let regrouped = drop_groups_within(&state_cumulant(s, n).unwrap(), &passive);
                let cluster = (1..=s as u32).map(Label).collect();
                let singles: Vec<Label> = passive.iter().copied().collect();
                let subsets = reduced_cumulant_subsets(Side::State, &cluster, &singles);
                assert_eq!(regrouped, subsets);
                assert_eq!(canonicalize_groups(&subsets, s), reduced_cumulant(Side::State, s, n).unwrap());
            }
        }
    }

    #[test]
    fn second_order_form_expands_to_cumulant() {
        for (s, tuple) in [(3, vec![2, 3]), (3, vec![1, 3]), (4, vec![2, 3, 4]), (5, vec![1, 3, 5])] {
            let t = labels(&tuple);
            let reduced = second_order_reduction(s, &t).unwrap();
            assert_eq!(expand_symbols(&reduced).unwrap(), dual_cumulant(s, &t).unwrap());
        }
        assert!(second_order_reduction(2, &labels(&[1, 2])).unwrap().is_zero());
        assert!(dual_cumulant(2, &labels(&[1, 2])).unwrap().is_zero());
    }

    #[test]
    fn corrupted_rule_changes_one_class() {
        let rule = CoefficientRule::Corrupted { blocks: 2, delta: 1 };
        assert_eq!(rule.coefficient(2), 0);
        assert_eq!(rule.coefficient(3), 2);
        assert_eq!(CoefficientRule::Standard.coefficient(4), -6);
    }
}
