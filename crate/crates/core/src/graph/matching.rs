use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{GraphError, NodeId, NodeSet, MAX_NODES};

/// Matching in a bipartite graph `B(P, Q, L)`; pairs are `(left, right)`
/// sorted by left node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteMatching {
    pairs: Vec<(NodeId, NodeId)>,
}

impl BipartiteMatching {
    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn left_nodes(&self) -> NodeSet {
        self.pairs.iter().map(|&(l, _)| l).collect()
    }

    pub fn right_nodes(&self) -> NodeSet {
        self.pairs.iter().map(|&(_, r)| r).collect()
    }

    /// Keeps the `size` pairs with the smallest left identifiers.
    pub fn truncated(&self, size: usize) -> Self {
        Self { pairs: self.pairs.iter().copied().take(size).collect() }
    }
}

/// Maximum-cardinality matching by augmenting paths (Kuhn). Left vertices
/// and their candidate partners are scanned in ascending order, so the
/// result is deterministic.
pub fn max_bipartite_matching(
    left: NodeSet,
    right: NodeSet,
    edges: &[(NodeId, NodeId)],
) -> Result<BipartiteMatching, GraphError> {
    if !left.is_disjoint(right) {
        return Err(GraphError::OverlappingSides);
    }
    let mut adj = vec![NodeSet::empty(); MAX_NODES + 1];
    for &(from, to) in edges {
        if !left.contains(from) || !right.contains(to) {
            return Err(GraphError::EdgeOutsideSides { from, to });
        }
        adj[from].insert(to);
    }

    let mut match_of_right: Vec<Option<NodeId>> = vec![None; MAX_NODES + 1];
    for l in left {
        let mut visited = NodeSet::empty();
        augment(l, &adj, &mut visited, &mut match_of_right);
    }

    let mut pairs: Vec<(NodeId, NodeId)> = right
        .iter()
        .filter_map(|r| match_of_right[r].map(|l| (l, r)))
        .collect();
    pairs.sort_unstable();
    Ok(BipartiteMatching { pairs })
}

fn augment(
    l: NodeId,
    adj: &[NodeSet],
    visited: &mut NodeSet,
    match_of_right: &mut [Option<NodeId>],
) -> bool {
    for r in adj[l] {
        if visited.contains(r) {
            continue;
        }
        visited.insert(r);
        let free = match match_of_right[r] {
            None => true,
            Some(other) => augment(other, adj, visited, match_of_right),
        };
        if free {
            match_of_right[r] = Some(l);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn perfect_matching() {
        let m = max_bipartite_matching(set(&[1, 2]), set(&[3, 4]), &[(1, 3), (2, 4)]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.pairs(), &[(1, 3), (2, 4)]);
    }

    #[test]
    fn shared_right_vertex() {
        let m = max_bipartite_matching(set(&[1, 2]), set(&[3]), &[(1, 3), (2, 3)]).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn needs_augmenting_path() {
        // greedy 1->3 blocks 2, augmentation moves 1 to 4
        let m = max_bipartite_matching(set(&[1, 2]), set(&[3, 4]), &[(1, 3), (1, 4), (2, 3)])
            .unwrap();
        assert_eq!(m.pairs(), &[(1, 4), (2, 3)]);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert!(max_bipartite_matching(set(&[1]), set(&[2]), &[]).unwrap().is_empty());
        assert_eq!(
            max_bipartite_matching(set(&[1, 2]), set(&[2]), &[]),
            Err(GraphError::OverlappingSides)
        );
        assert_eq!(
            max_bipartite_matching(set(&[1]), set(&[2]), &[(2, 1)]),
            Err(GraphError::EdgeOutsideSides { from: 2, to: 1 })
        );
    }

    #[test]
    fn truncation_keeps_smallest_left_ids() {
        let m = max_bipartite_matching(set(&[1, 2, 3]), set(&[4, 5, 6]), &[(1, 4), (2, 5), (3, 6)])
            .unwrap();
        assert_eq!(m.truncated(2).pairs(), &[(1, 4), (2, 5)]);
        assert_eq!(m.truncated(2).right_nodes(), set(&[4, 5]));
    }
}
