//! Exact symbolic algebra of labeled evolution operators.
//!
//! A [`FormalSum`] is an integer (rational while intermediate) combination of
//! products of [`OperatorSymbol`]s. Factors in a product act on disjoint label
//! sets, so products are commutative and are stored as sorted multisets.
//! The time argument is shared by every symbol and never evaluated.

mod cumulant;
mod sequence;
mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::partition::{ClusterElement, Label, PartitionError};

pub use cumulant::{
    canonicalize_groups, cumulant_expansion, cumulant_expansion_with, drop_first_order_on,
    drop_groups_within, dual_cumulant, expand_symbols, reduced_cumulant,
    reduced_cumulant_subsets, second_order_reduction, state_cumulant, CoefficientRule,
};
pub use sequence::{exp_star, ln_star, star_product, OperatorSequence};
pub use verify::{verify_algebra, verify_cluster_inversion, AlgebraReport, IdentityCheck};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("component {component} has non-integral coefficient {coefficient} on {monomial}")]
    NonIntegral {
        component: usize,
        monomial: String,
        coefficient: String,
    },
    #[error("sequence has a non-zero 0-component where none is allowed")]
    NonZeroUnitComponent,
    #[error("sequences are truncated at different orders ({0} vs {1})")]
    TruncationMismatch(usize, usize),
    #[error("invalid label tuple: {0}")]
    InvalidTuple(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Which group the symbol belongs to: `S(t)` on observables or `S*(t)` on states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Dual,
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    /// Group of operators of the particles in the argument.
    Group,
    /// Cumulant of the groups, `A_{|args|}(args)`.
    Cumulant,
    /// Reduced cumulant `U_{|args|}(args)`.
    ReducedCumulant,
}

/// A labeled operator symbol. The order of the operator is the number of
/// arguments; group symbols always carry singleton arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperatorSymbol {
    kind: SymbolKind,
    side: Side,
    args: Vec<ClusterElement>,
}

impl OperatorSymbol {
    pub fn group<I: IntoIterator<Item = Label>>(side: Side, labels: I) -> Self {
        let set: BTreeSet<Label> = labels.into_iter().collect();
        assert!(!set.is_empty(), "group symbol needs at least one label");
        OperatorSymbol {
            kind: SymbolKind::Group,
            side,
            args: set.into_iter().map(ClusterElement::Single).collect(),
        }
    }

    pub fn cumulant(side: Side, mut args: Vec<ClusterElement>) -> Self {
        assert!(!args.is_empty(), "cumulant symbol needs an argument");
        args.sort();
        OperatorSymbol {
            kind: SymbolKind::Cumulant,
            side,
            args,
        }
    }

    pub fn reduced_cumulant(side: Side, mut args: Vec<ClusterElement>) -> Self {
        assert!(!args.is_empty(), "reduced cumulant symbol needs an argument");
        args.sort();
        OperatorSymbol {
            kind: SymbolKind::ReducedCumulant,
            side,
            args,
        }
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn args(&self) -> &[ClusterElement] {
        &self.args
    }

    /// Order tag: the number of (cluster) arguments.
    pub fn order(&self) -> usize {
        self.args.len()
    }

    /// Declusterized label set the operator acts on.
    pub fn labels(&self) -> BTreeSet<Label> {
        self.args.iter().flat_map(|a| a.theta()).collect()
    }

    /// Replaces every label by a cluster element; group symbols are flattened through θ.
    pub fn relabel(&self, map: &dyn Fn(Label) -> ClusterElement) -> Self {
        match self.kind {
            SymbolKind::Group => {
                OperatorSymbol::group(self.side, self.labels().into_iter().flat_map(|l| map(l).theta()))
            }
            SymbolKind::Cumulant | SymbolKind::ReducedCumulant => {
                let args = self
                    .args
                    .iter()
                    .map(|a| match a {
                        ClusterElement::Single(l) => map(*l),
                        ClusterElement::Cluster(set) => {
                            ClusterElement::cluster(set.iter().flat_map(|l| map(*l).theta()))
                        }
                    })
                    .collect();
                let mut out = self.clone();
                out.args = args;
                out.args.sort();
                out
            }
        }
    }
}

impl fmt::Display for OperatorSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = match self.kind {
            SymbolKind::Group => "S",
            SymbolKind::Cumulant => "A",
            SymbolKind::ReducedCumulant => "U",
        };
        let star = if self.side == Side::State { "*" } else { "" };
        write!(f, "{head}{star}(")?;
        // clusters first, as in the written notation
        let clusters = self.args.iter().filter(|a| matches!(a, ClusterElement::Cluster(_)));
        let singles = self.args.iter().filter(|a| matches!(a, ClusterElement::Single(_)));
        for (i, a) in clusters.chain(singles).enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// A commutative product of symbols; the empty product is the unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<OperatorSymbol>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn new(mut factors: Vec<OperatorSymbol>) -> Self {
        factors.sort();
        Monomial(factors)
    }

    pub fn factors(&self) -> &[OperatorSymbol] {
        &self.0
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn times(&self, other: &Monomial) -> Monomial {
        let mut f = self.0.clone();
        f.extend(other.0.iter().cloned());
        Monomial::new(f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Exact linear combination of monomials. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FormalSum {
    terms: BTreeMap<Monomial, BigRational>,
}

fn rational(c: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(c))
}

impl FormalSum {
    pub fn zero() -> Self {
        FormalSum::default()
    }

    pub fn one() -> Self {
        FormalSum::monomial(Monomial::unit(), 1)
    }

    pub fn monomial(m: Monomial, coefficient: i128) -> Self {
        let mut s = FormalSum::zero();
        s.add_term(m, rational(coefficient));
        s
    }

    pub fn symbol(sym: OperatorSymbol) -> Self {
        FormalSum::monomial(Monomial::new(vec![sym]), 1)
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add_assign(&mut self, other: &FormalSum) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &FormalSum, factor: &BigRational) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c * factor);
        }
    }

    pub fn sub(&self, other: &FormalSum) -> FormalSum {
        let mut out = self.clone();
        out.add_scaled(other, &rational(-1));
        out
    }

    pub fn scaled(&self, factor: &BigRational) -> FormalSum {
        let mut out = FormalSum::zero();
        out.add_scaled(self, factor);
        out
    }

    pub fn mul(&self, other: &FormalSum) -> FormalSum {
        let mut out = FormalSum::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.times(m2), c1 * c2);
            }
        }
        out
    }

    pub fn relabel(&self, map: &dyn Fn(Label) -> ClusterElement) -> FormalSum {
        self.map_monomials(|m| {
            FormalSum::monomial(Monomial::new(m.factors().iter().map(|s| s.relabel(map)).collect()), 1)
        })
    }

    /// Replaces every monomial by `f(monomial)`, scaled by its coefficient.
    pub fn map_monomials<F: Fn(&Monomial) -> FormalSum>(&self, f: F) -> FormalSum {
        let mut out = FormalSum::zero();
        for (m, c) in &self.terms {
            out.add_scaled(&f(m), c);
        }
        out
    }

    /// Substitutes each symbol by a formal sum and expands the products.
    pub fn substitute<F: Fn(&OperatorSymbol) -> FormalSum>(&self, f: F) -> FormalSum {
        self.map_monomials(|m| {
            m.factors()
                .iter()
                .fold(FormalSum::one(), |acc, s| acc.mul(&f(s)))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// Integer coefficients, or the first offending monomial.
    pub fn integer_terms(&self) -> Result<Vec<(Monomial, BigInt)>, (Monomial, BigRational)> {
        self.terms
            .iter()
            .map(|(m, c)| {
                if c.is_integer() {
                    Ok((m.clone(), c.to_integer()))
                } else {
                    Err((m.clone(), c.clone()))
                }
            })
            .collect()
    }

    /// Integer coefficients as `i128` (panics only on overflow, which the
    /// bounded enumeration sizes exclude).
    pub fn integer_coefficients(&self) -> Vec<(Monomial, i128)> {
        self.integer_terms()
            .expect("integral formal sum")
            .into_iter()
            .map(|(m, c)| (m, i128::try_from(c).expect("coefficient fits in i128")))
            .collect()
    }

    pub fn coefficient_multiset(&self) -> Vec<i128> {
        let mut v: Vec<i128> = self.integer_coefficients().into_iter().map(|(_, c)| c).collect();
        v.sort();
        v
    }
}

impl fmt::Display for FormalSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            match (mag.is_one(), m.is_unit()) {
                (true, _) => write!(f, "{m}")?,
                (false, true) => write!(f, "{mag}")?,
                (false, false) => write!(f, "{mag}·{m}")?,
            }
        }
        Ok(())
    }
}

pub(crate) fn int(c: i128) -> BigRational {
    rational(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(side: Side, labels: &[u32]) -> FormalSum {
        FormalSum::symbol(OperatorSymbol::group(side, labels.iter().map(|&l| Label(l))))
    }

    #[test]
    fn products_commute_and_merge() {
        let a = s(Side::Dual, &[1]).mul(&s(Side::Dual, &[2]));
        let b = s(Side::Dual, &[2]).mul(&s(Side::Dual, &[1]));
        assert_eq!(a, b);
        let mut sum = a.clone();
        sum.add_assign(&b);
        assert_eq!(sum.len(), 1);
        assert_eq!(sum.coefficient_multiset(), vec![2]);
        assert!(sum.sub(&a).sub(&b).is_zero());
    }

    #[test]
    fn display_forms() {
        let e = s(Side::Dual, &[1, 2]).sub(&s(Side::Dual, &[1]).mul(&s(Side::Dual, &[2])));
        assert_eq!(e.to_string(), "-S(1)S(2) + S(1,2)");
        assert_eq!(e.scaled(&int(2)).to_string(), "-2·S(1)S(2) + 2·S(1,2)");
        assert_eq!(s(Side::State, &[3]).to_string(), "S*(3)");
        assert_eq!(FormalSum::zero().to_string(), "0");
    }

    #[test]
    fn relabel_flattens_groups() {
        let sym = OperatorSymbol::group(Side::Dual, [Label(1), Label(2)]);
        let map = |l: Label| {
            if l == Label(1) {
                ClusterElement::cluster([Label(5), Label(6)])
            } else {
                ClusterElement::Single(Label(9))
            }
        };
        let r = sym.relabel(&map);
        assert_eq!(r.labels(), [5, 6, 9].iter().map(|&l| Label(l)).collect());
        assert_eq!(r.order(), 3);
        let c = OperatorSymbol::cumulant(
            Side::Dual,
            vec![ClusterElement::Single(Label(1)), ClusterElement::Single(Label(2))],
        );
        let rc = c.relabel(&map);
        assert_eq!(rc.order(), 2);
        assert_eq!(rc.to_string(), "A({5,6},9)");
    }
}
