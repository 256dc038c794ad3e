use alloc::vec::Vec;

use super::{NodeId, NodeSet};

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All `k`-subsets of `universe`, lexicographic by sorted member list.
#[derive(Debug, Clone)]
pub struct Combinations {
    pool: Vec<NodeId>,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(universe: NodeSet, k: usize) -> Self {
        let pool = universe.to_vec();
        let done = k > pool.len();
        Self { pool, idx: (0..k).collect(), done }
    }
}

impl Iterator for Combinations {
    type Item = NodeSet;

    fn next(&mut self) -> Option<NodeSet> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&i| self.pool[i]).collect();
        let k = self.idx.len();
        let n = self.pool.len();
        // advance to the next index tuple
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

pub fn subsets_of_size(universe: NodeSet, k: usize) -> Combinations {
    Combinations::new(universe, k)
}

/// Every subset of `universe` with at most `max` members: smallest size
/// first, lexicographic within a size. The empty set comes first.
pub fn subsets_up_to(universe: NodeSet, max: usize) -> impl Iterator<Item = NodeSet> + Clone {
    (0..=max.min(universe.len())).flat_map(move |k| Combinations::new(universe, k))
}
