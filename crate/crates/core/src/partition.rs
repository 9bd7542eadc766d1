//! Set partitions, subsets, injections and the Stirling/Bell numbers that
//! supply every coefficient of the cluster and cumulant expansions.
//!
//! Partitions are enumerated as restricted-growth strings: a string
//! `a[0..n]` with `a[0] = 0` and `a[i] <= 1 + max(a[0..i])`, where element
//! `i` belongs to block `a[i]`. The enumeration order is lexicographic in
//! the string, which fixes a reproducible order for all downstream sums.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest ground set accepted by [`enumerate_partitions`]; Bell(12) = 4 213 597.
pub const MAX_PARTITION_GROUND: usize = 12;

/// Largest argument accepted by the exact Stirling/Bell tables.
pub const MAX_STIRLING_N: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("ground set is empty")]
    EmptyGround,
    #[error("ground set has {0} elements, enumeration is capped at {MAX_PARTITION_GROUND}")]
    TooLarge(usize),
}

/// A particle label. Labels within one ground set are distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of a ground set: a single particle label, or a wrapped cluster
/// of labels that the partition sum treats as one indivisible element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClusterElement {
    Single(Label),
    Cluster(BTreeSet<Label>),
}

impl ClusterElement {
    /// Wraps a non-empty label set. A one-label cluster is still a cluster.
    pub fn cluster<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        let set: BTreeSet<Label> = labels.into_iter().collect();
        assert!(!set.is_empty(), "a wrapped cluster must be non-empty");
        ClusterElement::Cluster(set)
    }

    /// Declusterization: the underlying label set.
    pub fn theta(&self) -> BTreeSet<Label> {
        match self {
            ClusterElement::Single(l) => std::iter::once(*l).collect(),
            ClusterElement::Cluster(set) => set.clone(),
        }
    }

    pub fn smallest_label(&self) -> Label {
        match self {
            ClusterElement::Single(l) => *l,
            ClusterElement::Cluster(set) => *set.iter().next().expect("non-empty cluster"),
        }
    }
}

impl fmt::Display for ClusterElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterElement::Single(l) => write!(f, "{l}"),
            ClusterElement::Cluster(set) => {
                write!(f, "{{")?;
                for (i, l) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{l}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Declusterized label set of a block of cluster elements.
pub fn theta_of(block: &[ClusterElement]) -> BTreeSet<Label> {
    block.iter().flat_map(|e| e.theta()).collect()
}

/// A partition of a ground set into non-empty, pairwise disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition<T = ClusterElement> {
    blocks: Vec<Vec<T>>,
}

impl<T> Partition<T> {
    pub fn blocks(&self) -> &[Vec<T>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `(-1)^{|P|-1} (|P|-1)!`
    pub fn cumulant_coefficient(&self) -> i128 {
        cumulant_coefficient(self.blocks.len())
    }
}

/// Streaming iterator over the restricted-growth strings of length `n`.
#[derive(Debug, Clone)]
pub struct RgsIter {
    codes: Vec<usize>,
    maxima: Vec<usize>,
    done: bool,
}

impl RgsIter {
    pub fn new(n: usize) -> Self {
        RgsIter {
            codes: vec![0; n],
            maxima: vec![0; n],
            done: false,
        }
    }
}

impl Iterator for RgsIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let n = self.codes.len();
        let current = self.codes.clone();
        // advance: rightmost position that can still grow
        let mut i = n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.codes[i] <= self.maxima[i - 1] {
                self.codes[i] += 1;
                self.maxima[i] = self.maxima[i - 1].max(self.codes[i]);
                for j in i + 1..n {
                    self.codes[j] = 0;
                    self.maxima[j] = self.maxima[i];
                }
                break;
            }
        }
        if n == 0 {
            self.done = true;
        }
        Some(current)
    }
}

/// Number of blocks encoded by a restricted-growth string.
pub fn rgs_block_count(codes: &[usize]) -> usize {
    codes.iter().max().map_or(0, |m| m + 1)
}

/// Groups element indices `0..codes.len()` into blocks.
pub fn rgs_blocks(codes: &[usize]) -> Vec<Vec<usize>> {
    let mut blocks = vec![Vec::new(); rgs_block_count(codes)];
    for (i, &b) in codes.iter().enumerate() {
        blocks[b].push(i);
    }
    blocks
}

/// All partitions of `ground`, exactly once each, in restricted-growth-string order.
pub fn enumerate_partitions<T: Clone>(ground: &[T]) -> Result<Vec<Partition<T>>, PartitionError> {
    if ground.is_empty() {
        return Err(PartitionError::EmptyGround);
    }
    if ground.len() > MAX_PARTITION_GROUND {
        return Err(PartitionError::TooLarge(ground.len()));
    }
    Ok(RgsIter::new(ground.len())
        .map(|codes| Partition {
            blocks: rgs_blocks(&codes)
                .into_iter()
                .map(|b| b.into_iter().map(|i| ground[i].clone()).collect())
                .collect(),
        })
        .collect())
}

/// Block structures of all partitions of `0..n`, as `(blocks, block_count)`.
/// `n = 0` yields the single empty partition.
pub fn index_partitions(n: usize) -> Result<Vec<Vec<Vec<usize>>>, PartitionError> {
    if n > MAX_PARTITION_GROUND {
        return Err(PartitionError::TooLarge(n));
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    Ok(RgsIter::new(n).map(|c| rgs_blocks(&c)).collect())
}

/// Stirling numbers of the second kind via `S(n,k) = k S(n-1,k) + S(n-1,k-1)`.
/// Arguments beyond [`MAX_STIRLING_N`] or `k > n` give 0.
pub fn stirling2(n: usize, k: usize) -> u128 {
    if n > MAX_STIRLING_N || k > n {
        return 0;
    }
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for m in 1..=n {
        for j in (1..=m).rev() {
            row[j] = j as u128 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    row[k]
}

/// Bell numbers from the Bell triangle, independent of [`stirling2`].
pub fn bell(n: usize) -> u128 {
    assert!(n <= MAX_STIRLING_N, "bell({n}) outside the exact table");
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("non-empty row"));
        for &x in &row {
            let last = *next.last().expect("non-empty row");
            next.push(last + x);
        }
        row = next;
    }
    row[0]
}

pub fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

pub fn binomial(n: usize, k: usize) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i as i128 + 1);
    }
    acc
}

/// `(-1)^{k-1} (k-1)!` for a partition with `k >= 1` blocks.
pub fn cumulant_coefficient(blocks: usize) -> i128 {
    assert!(blocks >= 1, "a partition of a non-empty set has at least one block");
    let magnitude = factorial(blocks - 1);
    if (blocks - 1) % 2 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// `(-1)^k k!` as weighted over the regrouped remainders.
pub fn alternating_factorial(blocks: usize) -> i128 {
    let magnitude = factorial(blocks);
    if blocks % 2 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// `Σ_P (-1)^{|P|} |P|!` over all partitions of an `n`-set, by enumeration.
/// The empty set has the single empty partition, giving 1.
pub fn alternating_partition_sum(n: usize) -> i128 {
    assert!(n <= 10, "alternating_partition_sum is enumerated for n <= 10");
    if n == 0 {
        return 1;
    }
    RgsIter::new(n)
        .map(|c| alternating_factorial(rgs_block_count(&c)))
        .sum()
}

/// All ordered tuples of `n` distinct labels from `1..=s`, lexicographic.
pub fn enumerate_injections(n: usize, s: usize) -> Vec<Vec<Label>> {
    if n > s {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; s + 1];
    fn rec(
        n: usize,
        s: usize,
        current: &mut Vec<Label>,
        used: &mut [bool],
        out: &mut Vec<Vec<Label>>,
    ) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for l in 1..=s {
            if !used[l] {
                used[l] = true;
                current.push(Label(l as u32));
                rec(n, s, current, used, out);
                current.pop();
                used[l] = false;
            }
        }
    }
    rec(n, s, &mut current, &mut used, &mut out);
    out
}

/// Bitmasks of the `k`-element subsets of `0..n`, ascending.
pub fn subsets_of_size(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1u32 << n))
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

/// Labels `1..=n` as a set.
pub fn label_range(lo: u32, hi: u32) -> BTreeSet<Label> {
    (lo..=hi).map(Label).collect()
}
