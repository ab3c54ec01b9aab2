//! Bitmask coalitions of retailers and suppliers.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A subset of players encoded as a bitmask; bit `k` is player `k` (0-based).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Self = Self(0);

    /// Every player in `0..n`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n < 32);
        Self((1u32 << n) - 1)
    }

    pub fn singleton(k: usize) -> Self {
        Self(1 << k)
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        Self(members.into_iter().fold(0, |acc, k| acc | (1 << k)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, k: usize) -> bool {
        k < 32 && self.0 & (1 << k) != 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn intersects(self, other: Self) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn without(self, k: usize) -> Self {
        Self(self.0 & !(1 << k))
    }

    /// Complement within the first `n` players.
    pub fn complement(self, n: usize) -> Self {
        Self(!self.0 & Self::full(n).0)
    }

    /// Members in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                k
            })
        })
    }

    /// All subsets of `0..n` in increasing bitmask order, starting with the empty set.
    pub fn all(n: usize) -> impl Iterator<Item = Self> {
        (0..1u32 << n).map(Self)
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = Self> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = (cur != full).then(|| ((cur | !full).wrapping_add(1)) & full);
            Some(Self(cur))
        })
    }

    pub fn fits(self, n: usize) -> bool {
        self.0 >> n == 0
    }
}

impl fmt::Display for Coalition {
    /// 1-based member list, `{}` for the empty coalition.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (idx, k) in self.members().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", k + 1)?;
        }
        f.write_str("}")
    }
}

/// A retailer coalition `R` together with a supplier coalition `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoalitionPair {
    pub retailers: Coalition,
    pub suppliers: Coalition,
}

impl CoalitionPair {
    pub fn new(retailers: Coalition, suppliers: Coalition) -> Self {
        Self {
            retailers,
            suppliers,
        }
    }

    pub fn grand(n: usize, m: usize) -> Self {
        Self::new(Coalition::full(n), Coalition::full(m))
    }

    /// Dense index `R * 2^m + S`.
    pub fn index(self, m: usize) -> usize {
        ((self.retailers.0 as usize) << m) | self.suppliers.0 as usize
    }

    pub fn from_index(index: usize, m: usize) -> Self {
        Self::new(
            Coalition((index >> m) as u32),
            Coalition((index & ((1 << m) - 1)) as u32),
        )
    }

    /// Every pair over `n` retailers and `m` suppliers in index order.
    pub fn all(n: usize, m: usize) -> impl Iterator<Item = Self> {
        (0..1usize << (n + m)).map(move |k| Self::from_index(k, m))
    }
}

impl fmt::Display for CoalitionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(R={}, S={})", self.retailers, self.suppliers)
    }
}
