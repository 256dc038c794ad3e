use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{NodeId, MAX_NODES};

/// Set of node identifiers stored as a bitmask (bit `i` is node `i + 1`).
///
/// Ordering is lexicographic on the ascending member list, which is the
/// order witnesses and components are reported in.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const fn empty() -> Self {
        Self(0)
    }

    /// `{1, ..., n}`
    pub const fn full(n: usize) -> Self {
        if n >= MAX_NODES {
            Self(u64::MAX)
        } else {
            Self((1u64 << n) - 1)
        }
    }

    pub const fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(v: NodeId) -> Self {
        Self(bit(v))
    }

    pub fn contains(self, v: NodeId) -> bool {
        (1..=MAX_NODES).contains(&v) && self.0 & bit(v) != 0
    }

    pub fn insert(&mut self, v: NodeId) {
        self.0 |= bit(v);
    }

    pub fn remove(&mut self, v: NodeId) {
        self.0 &= !bit(v);
    }

    pub fn with(self, v: NodeId) -> Self {
        Self(self.0 | bit(v))
    }

    pub fn without(self, v: NodeId) -> Self {
        Self(self.0 & !bit(v))
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub const fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    pub const fn difference(self, other: Self) -> Self {
        Self(self.0 & !other.0)
    }

    pub const fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn first(self) -> Option<NodeId> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize + 1)
    }

    pub fn iter(self) -> NodeSetIter {
        NodeSetIter(self.0)
    }

    pub fn to_vec(self) -> Vec<NodeId> {
        self.iter().collect()
    }
}

fn bit(v: NodeId) -> u64 {
    debug_assert!((1..=MAX_NODES).contains(&v), "node id {v} out of range");
    1u64 << (v - 1)
}

#[derive(Debug, Clone)]
pub struct NodeSetIter(u64);

impl Iterator for NodeSetIter {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.0 == 0 {
            return None;
        }
        let v = self.0.trailing_zeros() as usize + 1;
        self.0 &= self.0 - 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for NodeSetIter {}

impl IntoIterator for NodeSet {
    type Item = NodeId;
    type IntoIter = NodeSetIter;

    fn into_iter(self) -> NodeSetIter {
        self.iter()
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut set = Self::empty();
        for v in iter {
            set.insert(v);
        }
        set
    }
}

impl Ord for NodeSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for NodeSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for NodeSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<NodeId>::deserialize(deserializer)?;
        if let Some(&bad) = ids.iter().find(|&&v| v == 0 || v > MAX_NODES) {
            return Err(serde::de::Error::custom(alloc::format!("node id {bad} out of range")));
        }
        Ok(ids.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let a: NodeSet = [1, 3].into_iter().collect();
        let b: NodeSet = [2].into_iter().collect();
        let c: NodeSet = [1, 2, 9].into_iter().collect();
        let mut v = alloc::vec![b, a, c];
        v.sort();
        assert_eq!(v, [c, a, b]);
    }

    #[test]
    fn set_algebra() {
        let a: NodeSet = [1, 2, 3].into_iter().collect();
        let b: NodeSet = [3, 4].into_iter().collect();
        assert_eq!(a.union(b).to_vec(), [1, 2, 3, 4]);
        assert_eq!(a.intersection(b).to_vec(), [3]);
        assert_eq!(a.difference(b).to_vec(), [1, 2]);
        assert!(NodeSet::singleton(2).is_subset(a));
        assert_eq!(NodeSet::full(64).len(), 64);
        assert_eq!(alloc::format!("{a}"), "{1,2,3}");
        assert_eq!(b.first(), Some(3));
    }
}
