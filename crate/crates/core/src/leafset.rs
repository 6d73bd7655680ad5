//! Fixed-width bitsets over leaf indices, used as clade keys.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LeafSet {
    words: Vec<u64>,
}

impl LeafSet {
    pub fn empty(n_leaves: usize) -> Self {
        LeafSet {
            words: vec![0; n_leaves.div_ceil(64).max(1)],
        }
    }

    pub fn singleton(n_leaves: usize, leaf: usize) -> Self {
        let mut s = Self::empty(n_leaves);
        s.insert(leaf);
        s
    }

    pub fn from_indices(n_leaves: usize, leaves: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n_leaves);
        for l in leaves {
            s.insert(l);
        }
        s
    }

    pub fn full(n_leaves: usize) -> Self {
        Self::from_indices(n_leaves, 0..n_leaves)
    }

    pub fn insert(&mut self, leaf: usize) {
        self.words[leaf / 64] |= 1u64 << (leaf % 64);
    }

    pub fn contains(&self, leaf: usize) -> bool {
        self.words
            .get(leaf / 64)
            .is_some_and(|w| w & (1u64 << (leaf % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &LeafSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn union(&self, other: &LeafSet) -> LeafSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn difference(&self, other: &LeafSet) -> LeafSet {
        LeafSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &LeafSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &LeafSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

impl fmt::Debug for LeafSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
