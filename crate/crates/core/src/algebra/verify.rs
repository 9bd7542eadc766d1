//! Exhaustive symbolic sweeps over the cluster/cumulant identities.

use std::collections::BTreeSet;
use std::fmt;

use super::cumulant::{dual_cumulant_with, dual_ground, state_cumulant_with, state_ground};
use super::{
    canonicalize_groups, cumulant_expansion_with, drop_first_order_on, drop_groups_within, exp_star,
    expand_symbols, int, ln_star, reduced_cumulant, reduced_cumulant_subsets, second_order_reduction,
    AlgebraError, CoefficientRule, FormalSum, Monomial, OperatorSequence, OperatorSymbol, Side,
};
use crate::partition::{
    alternating_partition_sum, cumulant_coefficient, enumerate_partitions, stirling2, subsets_of_size,
    theta_of, ClusterElement, Label,
};

/// Outcome of one identity at one `(s, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub identity: &'static str,
    pub s: usize,
    pub n: usize,
    pub passed: bool,
    /// First offending monomial with its residual coefficient.
    pub detail: Option<String>,
}

impl fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{:<28} s={:<2} n={:<2} {status}", self.identity, self.s, self.n)?;
        if let Some(d) = &self.detail {
            write!(f, "  {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlgebraReport {
    pub checks: Vec<IdentityCheck>,
}

impl AlgebraReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, identity: &'static str, s: usize, n: usize, lhs: &FormalSum, rhs: &FormalSum) {
        let residual = lhs.sub(rhs);
        let detail = residual.iter().next().map(|(m, c)| format!("residual {c} on {m}"));
        self.checks.push(IdentityCheck {
            identity,
            s,
            n,
            passed: residual.is_zero(),
            detail,
        });
    }

    fn push_flag(&mut self, identity: &'static str, s: usize, n: usize, ok: bool, detail: String) {
        self.checks.push(IdentityCheck {
            identity,
            s,
            n,
            passed: ok,
            detail: (!ok).then_some(detail),
        });
    }

    fn extend(&mut self, other: AlgebraReport) {
        self.checks.extend(other.checks);
    }
}

/// `Σ_P Π 𝔄_{|X_i|}(X_i)` with every cumulant expanded under `rule`.
fn partition_of_cumulants(
    side: Side,
    ground: &[ClusterElement],
    rule: &CoefficientRule,
) -> Result<FormalSum, AlgebraError> {
    let mut out = FormalSum::zero();
    for p in enumerate_partitions(ground)? {
        let mut product = FormalSum::one();
        for block in p.blocks() {
            product = product.mul(&cumulant_expansion_with(side, block, rule)?);
        }
        out.add_assign(&product);
    }
    Ok(out)
}

fn whole_group(side: Side, ground: &[ClusterElement]) -> FormalSum {
    FormalSum::symbol(OperatorSymbol::group(side, theta_of(ground)))
}

/// Substitutes the cumulants into the cluster expansion and checks that it
/// collapses to the single group, for every `(s, n)` with `s ≥ 1`, `s + n ≤ n_max`.
/// The dual side runs over every choice of the `n` free labels.
pub fn verify_cluster_inversion(n_max: usize, rule: &CoefficientRule) -> Result<AlgebraReport, AlgebraError> {
    let mut report = AlgebraReport::default();
    for total in 1..=n_max {
        for n in 0..total {
            let s = total - n;
            let state = state_ground(s, n);
            report.push(
                "state cluster expansion",
                s,
                n,
                &partition_of_cumulants(Side::State, &state, rule)?,
                &whole_group(Side::State, &state),
            );
            let mut dual_ok = true;
            let mut detail = String::new();
            for mask in subsets_of_size(total, n) {
                let tuple: Vec<Label> = (0..total as u32).filter(|i| mask & (1 << i) != 0).map(|i| Label(i + 1)).collect();
                let ground = dual_ground(total, &tuple)?.expect("cluster is non-empty for n < total");
                let residual = partition_of_cumulants(Side::Dual, &ground, rule)?.sub(&whole_group(Side::Dual, &ground));
                let first = residual.iter().next().map(|(m, c)| format!("residual {c} on {m}"));
                if let Some(d) = first {
                    if dual_ok {
                        detail = format!("J={tuple:?}: {d}");
                    }
                    dual_ok = false;
                }
            }
            report.push_flag("dual cluster expansion", s, n, dual_ok, detail);
        }
    }
    Ok(report)
}

/// `Exp⋆ ∘ Ln⋆` round trip and agreement of the logarithm with both cumulant
/// families under the cluster embedding.
fn verify_log_exp(n_max: usize, rule: &CoefficientRule) -> Result<AlgebraReport, AlgebraError> {
    let mut report = AlgebraReport::default();
    for side in [Side::Dual, Side::State] {
        let groups = OperatorSequence::groups(side, n_max);
        let log = ln_star(&groups)?;
        let back = exp_star(&log)?;
        let mut expected = groups.clone();
        expected.set_component(0, FormalSum::one());
        for n in 0..=n_max {
            report.push("exp(ln(I+S)) = I+S", n, 0, back.component(n), expected.component(n));
        }
        for total in 1..=n_max {
            for n in 0..total {
                let s = total - n;
                // component n+1 of the logarithm with label 1 wrapped as the cluster
                let (tuple, symbolic) = match side {
                    Side::Dual => {
                        let tuple: Vec<Label> = (s as u32 + 1..=total as u32).map(Label).collect();
                        (tuple.clone(), dual_cumulant_with(total, &tuple, rule)?)
                    }
                    Side::State => ((s as u32 + 1..=total as u32).map(Label).collect(), state_cumulant_with(s, n, rule)?),
                };
                let cluster: BTreeSet<Label> = (1..=s as u32).map(Label).collect();
                let embedded = log.component(n + 1).relabel(&|l: Label| {
                    if l.0 == 1 {
                        ClusterElement::Cluster(cluster.clone())
                    } else {
                        ClusterElement::Single(tuple[(l.0 - 2) as usize])
                    }
                });
                let name = match side {
                    Side::Dual => "ln component = dual cumulant",
                    Side::State => "ln component = state cumulant",
                };
                report.push(name, s, n, &embedded, &symbolic);
            }
        }
    }
    Ok(report)
}

/// Regrouping identities of the reduced cumulants and the second-order reduction.
fn verify_reductions(n_max: usize) -> Result<AlgebraReport, AlgebraError> {
    let mut report = AlgebraReport::default();
    for total in 1..=n_max {
        for n in 0..total {
            let s = total - n;
            let cluster: BTreeSet<Label> = (1..=s as u32).map(Label).collect();
            let free: Vec<Label> = (s as u32 + 1..=total as u32).map(Label).collect();
            let passive: BTreeSet<Label> = free.iter().copied().collect();
            for side in [Side::Dual, Side::State] {
                let cumulant = match side {
                    Side::Dual => dual_cumulant_with(total, &free, &CoefficientRule::Standard)?,
                    Side::State => state_cumulant_with(s, n, &CoefficientRule::Standard)?,
                };
                let subsets = reduced_cumulant_subsets(side, &cluster, &free);
                report.push("cumulant regrouped = U", s, n, &drop_groups_within(&cumulant, &passive), &subsets);
                let binomial = match side {
                    Side::Dual => reduced_cumulant(side, total, n)?,
                    Side::State => reduced_cumulant(side, s, n)?,
                };
                report.push("U subsets = U binomial", s, n, &canonicalize_groups(&subsets, s), &binomial);
            }
            if n >= 2 {
                let second = second_order_reduction(total, &free)?;
                report.push(
                    "second-order reduction",
                    s,
                    n,
                    &expand_symbols(&second)?,
                    &dual_cumulant_with(total, &free, &CoefficientRule::Standard)?,
                );
                let mut collapsed = FormalSum::zero();
                for mask in 1u32..(1u32 << n) {
                    let y: Vec<Label> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| free[i]).collect();
                    let sign = if (n - y.len()) % 2 == 0 { 1 } else { -1 };
                    let a2 = OperatorSymbol::cumulant(
                        Side::Dual,
                        vec![ClusterElement::Cluster(cluster.clone()), ClusterElement::cluster(y)],
                    );
                    collapsed.add_term(Monomial::new(vec![a2]), int(sign));
                }
                report.push("second-order collapsed", s, n, &drop_first_order_on(&second, &passive), &collapsed);
            }
        }
    }
    Ok(report)
}

fn verify_combinatorics(report: &mut AlgebraReport) {
    for n in 1..=8usize {
        let got = alternating_partition_sum(n);
        let expected = if n % 2 == 0 { 1 } else { -1 };
        report.push_flag("alternating partition sum", n, 0, got == expected, format!("got {got}"));
    }
    for s in 1..=10usize {
        let total: i128 = (1..=s)
            .map(|k| cumulant_coefficient(k) * stirling2(s, k) as i128)
            .sum();
        let expected = i128::from(s == 1);
        report.push_flag("stirling delta identity", s, 0, total == expected, format!("got {total}"));
    }
}

/// Every symbolic identity up to `n_max` (at most 6).
pub fn verify_algebra(n_max: usize, rule: &CoefficientRule) -> Result<AlgebraReport, AlgebraError> {
    let mut report = AlgebraReport::default();
    verify_combinatorics(&mut report);
    report.extend(verify_log_exp(n_max, rule)?);
    report.extend(verify_cluster_inversion(n_max, rule)?);
    report.extend(verify_reductions(n_max)?);
    Ok(report)
}
