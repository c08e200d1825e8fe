use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of feature indices over `[d]`, stored sorted and 0-based.
/// `Display` renders indices 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subset {
    dim: usize,
    indices: Vec<usize>,
}

impl Subset {
    pub fn new(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&i) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::Domain(format!("index {i} outside [0, {dim})")));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate subset index".into()));
        }
        Ok(Self { dim, indices })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            indices: (0..dim).collect(),
        }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self {
            dim: mask.len(),
            indices: mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect(),
        }
    }

    pub fn from_bits(dim: usize, bits: u64) -> Self {
        debug_assert!(dim <= 64);
        Self {
            dim,
            indices: (0..dim).filter(|i| bits >> i & 1 == 1).collect(),
        }
    }

    /// Bit representation, available for `d <= 64`.
    pub fn bits(&self) -> Option<u64> {
        (self.dim <= 64).then(|| self.indices.iter().fold(0u64, |b, &i| b | 1 << i))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.dim
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    pub fn complement(&self) -> Self {
        let mask = self.mask();
        Self {
            dim: self.dim,
            indices: (0..self.dim).filter(|&i| !mask[i]).collect(),
        }
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        Error::check_dim(self.dim, other.dim)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        let mut indices: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { dim: self.dim, indices })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            indices: self.indices.iter().copied().filter(|&i| other.contains(i)).collect(),
        })
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dim == other.dim && self.indices.iter().all(|&i| other.contains(i))
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.indices.iter().any(|&i| other.contains(i))
    }

    pub fn symmetric_difference_len(&self, other: &Self) -> Result<usize> {
        self.same_dim(other)?;
        let common = self.indices.iter().filter(|&&i| other.contains(i)).count();
        Ok(self.len() + other.len() - 2 * common)
    }

    pub fn with(&self, i: usize) -> Self {
        let mut indices = self.indices.clone();
        if let Err(pos) = indices.binary_search(&i) {
            indices.insert(pos, i);
        }
        Self { dim: self.dim, indices }
    }

    /// Indices rendered 1-based, as shown in reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Number of subsets of `[dim]` with at most `max_size` elements.
pub fn count_subsets_up_to(dim: usize, max_size: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for k in 0..=max_size.min(dim) {
        total += binom;
        binom = binom * (dim - k) as u128 / (k + 1) as u128;
    }
    total
}

/// All subsets of `[dim]` with `|S| <= max_size`, ordered by size and then
/// lexicographically by index list.
pub fn subsets_up_to(dim: usize, max_size: usize) -> impl Iterator<Item = Subset> {
    (0..=max_size.min(dim)).flat_map(move |k| Combinations::new(dim, k))
}

/// Every subset of `[dim]`, in the same order as [`subsets_up_to`].
pub fn all_subsets(dim: usize) -> impl Iterator<Item = Subset> {
    subsets_up_to(dim, dim)
}

struct Combinations {
    dim: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(dim: usize, k: usize) -> Self {
        Self {
            dim,
            current: (k <= dim).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        let cur = self.current.take()?;
        let out = Subset {
            dim: self.dim,
            indices: cur.clone(),
        };
        let k = cur.len();
        let mut next = cur;
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.dim - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
