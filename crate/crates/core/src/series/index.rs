use std::cmp::Ordering;
use std::fmt;

use crate::error::{Result, SpsError};
use crate::model::TruncationSpec;
use crate::scalar::Scalar;

/// Default cap on stored coefficient slots.
pub const DEFAULT_MAX_ENTRIES: u128 = 10_000_000;

/// Exponent vector `n ∈ ℕ^M` of one basis function `e^{(n·λ)t}`.
///
/// Ordered by total degree, then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    n: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(n: Vec<u32>) -> Self {
        let degree = n.iter().sum();
        Self { n, degree }
    }

    pub fn zero(m: usize) -> Self {
        Self::new(vec![0; m])
    }

    pub fn unit(m: usize, i: usize) -> Self {
        let mut n = vec![0; m];
        n[i] = 1;
        Self::new(n)
    }

    pub fn components(&self) -> &[u32] {
        &self.n
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `n · λ`.
    pub fn dot<T: Scalar>(&self, lambda: &[T]) -> T {
        self.n.iter().zip(lambda).map(|(&k, &l)| T::lit(k as f64) * l).sum()
    }

    /// `Πᵢ (nᵢ + 1)`, as a float since it overflows integers at high degree.
    pub fn weight<T: Scalar>(&self) -> T {
        self.n.iter().fold(T::one(), |acc, &k| acc * T::lit(k as f64 + 1.0))
    }

    /// `Πᵢ pᵢ^{nᵢ}`.
    pub fn monomial<T: Scalar>(&self, p: &[T]) -> T {
        self.n
            .iter()
            .zip(p)
            .fold(T::one(), |acc, (&k, &x)| acc * x.powi(k as i32))
    }

    /// Index of the single nonzero component when this is a basis vector.
    pub fn basis_axis(&self) -> Option<usize> {
        if self.degree == 1 {
            self.n.iter().position(|&k| k == 1)
        } else {
            None
        }
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &Self) -> bool {
        self.n.iter().zip(&other.n).all(|(a, b)| a <= b)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(perm.iter().map(|&p| self.n[p]).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| self.n.cmp(&other.n))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.n)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(n: Vec<u32>) -> Self {
        Self::new(n)
    }
}

/// All multi-indices of total degree `degree` admitted by `truncation`, in
/// lexicographic order.
pub fn shell(truncation: TruncationSpec, m: usize, degree: u32) -> Vec<MultiIndex> {
    let cap = match truncation {
        TruncationSpec::PerIndex(d) => d,
        TruncationSpec::TotalDegree(_) => degree,
    };
    let mut out = Vec::new();
    if (degree as u64) > truncation.max_degree(m) {
        return out;
    }
    let mut cur = Vec::with_capacity(m);
    compositions(degree, m, cap, &mut cur, &mut out);
    out
}

fn compositions(rest: u32, slots: usize, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if slots == 1 {
        if rest <= cap {
            cur.push(rest);
            out.push(MultiIndex::new(cur.clone()));
            cur.pop();
        }
        return;
    }
    let remaining_cap = cap as u64 * (slots as u64 - 1);
    for first in 0..=rest.min(cap) {
        if ((rest - first) as u64) > remaining_cap {
            continue;
        }
        cur.push(first);
        compositions(rest - first, slots - 1, cap, cur, out);
        cur.pop();
    }
}

/// Every multi-index admitted by `truncation` over `m` variables, sorted by
/// ascending total degree with lexicographic ties.
pub fn enumerate_indices(truncation: TruncationSpec, m: usize) -> Result<Vec<MultiIndex>> {
    enumerate_with_budget(truncation, m, DEFAULT_MAX_ENTRIES)
}

pub(crate) fn enumerate_with_budget(truncation: TruncationSpec, m: usize, budget: u128) -> Result<Vec<MultiIndex>> {
    if m == 0 {
        return Err(SpsError::InvalidArgument("dimension must be at least 1".into()));
    }
    let entries = truncation.count(m);
    if entries > budget {
        return Err(SpsError::TruncationTooLarge { entries, budget });
    }
    let max = truncation.max_degree(m) as u32;
    Ok((0..=max).flat_map(|d| shell(truncation, m, d)).collect())
}

/// Row-major box layout `[0, cap]^M` with the last axis contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub side: usize,
    pub strides: Vec<usize>,
    pub len: usize,
}

impl Layout {
    pub fn new(truncation: TruncationSpec, m: usize, budget: u128) -> Result<Self> {
        let side = match truncation {
            TruncationSpec::PerIndex(d) => d as usize + 1,
            TruncationSpec::TotalDegree(n) => n as usize + 1,
        };
        let len = (side as u128).saturating_pow(m as u32);
        if len > budget {
            return Err(SpsError::TruncationTooLarge { entries: len, budget });
        }
        let mut strides = vec![1usize; m];
        for k in (0..m.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * side;
        }
        Ok(Self {
            side,
            strides,
            len: len as usize,
        })
    }

    #[inline]
    pub fn offset(&self, n: &[u32]) -> usize {
        n.iter().zip(&self.strides).map(|(&k, &s)| k as usize * s).sum()
    }
}
