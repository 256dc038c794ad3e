//! Directed communication topologies and the structural primitives the
//! condition checkers and protocols are built on.
//!
//! Nodes are numbered `1..=n`. Node sets are bitmasks, so graphs are limited
//! to [`MAX_NODES`] vertices; every exhaustive check in this crate is
//! exponential anyway and is meant for desk-scale graphs.

mod matching;
mod nodeset;
mod reach;
mod scc;
mod subsets;

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matching::{max_bipartite_matching, BipartiteMatching};
pub use nodeset::{NodeSet, NodeSetIter};
pub use reach::{path_avoiding_internal, reach_set, reach_within};
pub use scc::{
    source_components, source_components_within, strongly_connected_components,
    unique_source_component, Sources,
};
pub use subsets::{binomial, subsets_of_size, subsets_up_to, Combinations};

/// 1-based node identifier.
pub type NodeId = usize;

/// Largest supported node count.
pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("graph has {n} nodes, at most {max} are supported", max = MAX_NODES)]
    TooManyNodes { n: usize },
    #[error("self-loop on node {node}")]
    SelfLoop { node: NodeId },
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: NodeId, to: NodeId },
    #[error("node {node} is outside 1..={n}")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("removing the fault set leaves no nodes")]
    EmptySubgraph,
    #[error("node {node} belongs to the fault set")]
    NodeInFaultSet { node: NodeId },
    #[error("left and right sides of a bipartite graph overlap")]
    OverlappingSides,
    #[error("edge {from} -> {to} does not run from the left side to the right side")]
    EdgeOutsideSides { from: NodeId, to: NodeId },
}

/// Immutable directed graph without self-loops or parallel edges.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DiGraph {
    n: usize,
    out: Vec<u64>,
    inn: Vec<u64>,
}

impl DiGraph {
    pub fn new<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        if n > MAX_NODES {
            return Err(GraphError::TooManyNodes { n });
        }
        let mut out = alloc::vec![0u64; n];
        let mut inn = alloc::vec![0u64; n];
        for (from, to) in edges {
            for node in [from, to] {
                if node == 0 || node > n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if from == to {
                return Err(GraphError::SelfLoop { node: from });
            }
            let bit = 1u64 << (to - 1);
            if out[from - 1] & bit != 0 {
                return Err(GraphError::DuplicateEdge { from, to });
            }
            out[from - 1] |= bit;
            inn[to - 1] |= 1u64 << (from - 1);
        }
        Ok(Self { n, out, inn })
    }

    /// Complete digraph: every ordered pair of distinct nodes is an edge.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges = (1..=n).flat_map(|u| (1..=n).filter(move |&v| v != u).map(move |v| (u, v)));
        Self::new(n, edges)
    }

    /// Directed cycle `1 -> 2 -> ... -> n -> 1`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Self::new(n, core::iter::empty());
        }
        Self::new(n, (1..=n).map(|u| (u, u % n + 1)))
    }

    /// Directed path `1 -> 2 -> ... -> n`.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|u| (u, u + 1)))
    }

    /// Builds a graph from an `n*n` adjacency bit pattern over ordered pairs
    /// `(u, v)`, `u != v`, enumerated row by row. Bit `i` of `code` decides
    /// the `i`-th pair. Used by exhaustive sweeps.
    pub fn from_code(n: usize, code: u64) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut bit = 0;
        for u in 1..=n {
            for v in 1..=n {
                if u == v {
                    continue;
                }
                if code >> bit & 1 == 1 {
                    edges.push((u, v));
                }
                bit += 1;
            }
        }
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(|m| m.count_ones() as usize).sum()
    }

    pub fn nodes(&self) -> NodeSet {
        NodeSet::full(self.n)
    }

    pub fn contains_node(&self, v: NodeId) -> bool {
        v >= 1 && v <= self.n
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.contains_node(from) && self.contains_node(to) && self.out[from - 1] >> (to - 1) & 1 == 1
    }

    pub fn out_neighbors(&self, v: NodeId) -> NodeSet {
        NodeSet::from_bits(self.out[v - 1])
    }

    pub fn in_neighbors(&self, v: NodeId) -> NodeSet {
        NodeSet::from_bits(self.inn[v - 1])
    }

    /// Nodes outside `set` with an edge into `set`.
    pub fn incoming_neighbors_of_set(&self, set: NodeSet) -> NodeSet {
        set.iter()
            .fold(NodeSet::empty(), |acc, v| acc.union(self.in_neighbors(v)))
            .difference(set)
    }

    /// Nodes of `target` that receive an edge from some node of `sources`.
    pub fn out_neighbors_in(&self, sources: NodeSet, target: NodeSet) -> NodeSet {
        sources
            .iter()
            .fold(NodeSet::empty(), |acc, v| acc.union(self.out_neighbors(v)))
            .intersection(target)
    }

    /// Edges in ascending `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (1..=self.n).flat_map(move |u| self.out_neighbors(u).iter().map(move |v| (u, v)))
    }

    /// Edges running from `from_set` into `to_set` (the `E_{P,Q}` edge set).
    pub fn edges_between(&self, from_set: NodeSet, to_set: NodeSet) -> Vec<(NodeId, NodeId)> {
        from_set
            .iter()
            .flat_map(|u| self.out_neighbors(u).intersection(to_set).iter().map(move |v| (u, v)))
            .collect()
    }

    /// Subgraph induced by `V - f_set`, relabeled to `1..=m` with the
    /// original identifiers kept alongside.
    pub fn induced_subgraph(&self, f_set: NodeSet) -> Result<InducedSubgraph, GraphError> {
        self.check_set(f_set)?;
        let kept: Vec<NodeId> = self.nodes().difference(f_set).iter().collect();
        if kept.is_empty() {
            return Err(GraphError::EmptySubgraph);
        }
        let local = |orig: NodeId| kept.iter().position(|&k| k == orig).map(|i| i + 1);
        let edges: Vec<_> = self
            .edges()
            .filter_map(|(u, v)| Some((local(u)?, local(v)?)))
            .collect();
        let graph = DiGraph::new(kept.len(), edges)?;
        Ok(InducedSubgraph { graph, labels: kept })
    }

    pub(crate) fn check_set(&self, set: NodeSet) -> Result<(), GraphError> {
        match set.iter().find(|&v| !self.contains_node(v)) {
            Some(node) => Err(GraphError::NodeOutOfRange { node, n: self.n }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_node(&self, node: NodeId) -> Result<(), GraphError> {
        if self.contains_node(node) {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange { node, n: self.n })
        }
    }
}

impl fmt::Debug for DiGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiGraph")
            .field("n", &self.n)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

/// Serializable edge-list form, `{"n": .., "edges": [[u, v], ..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl From<&DiGraph> for EdgeList {
    fn from(g: &DiGraph) -> Self {
        Self { n: g.n, edges: g.edges().collect() }
    }
}

impl TryFrom<EdgeList> for DiGraph {
    type Error = GraphError;

    fn try_from(list: EdgeList) -> Result<Self, Self::Error> {
        DiGraph::new(list.n, list.edges)
    }
}

impl Serialize for DiGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        EdgeList::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let list = EdgeList::deserialize(deserializer)?;
        DiGraph::try_from(list).map_err(serde::de::Error::custom)
    }
}

/// `G_F` together with the map back to the identifiers of the parent graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedSubgraph {
    pub graph: DiGraph,
    labels: Vec<NodeId>,
}

impl InducedSubgraph {
    pub fn to_original(&self, local: NodeId) -> NodeId {
        self.labels[local - 1]
    }

    pub fn to_local(&self, original: NodeId) -> Option<NodeId> {
        self.labels.iter().position(|&v| v == original).map(|i| i + 1)
    }

    /// Re-expresses a set of local identifiers in parent identifiers.
    pub fn lift(&self, local: NodeSet) -> NodeSet {
        local.iter().map(|v| self.to_original(v)).collect()
    }

    pub fn labels(&self) -> &[NodeId] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn rejects_malformed_edge_lists() {
        assert_eq!(DiGraph::new(0, []), Err(GraphError::EmptyGraph));
        assert_eq!(DiGraph::new(3, [(2, 2)]), Err(GraphError::SelfLoop { node: 2 }));
        assert_eq!(
            DiGraph::new(3, [(1, 2), (1, 2)]),
            Err(GraphError::DuplicateEdge { from: 1, to: 2 })
        );
        assert_eq!(
            DiGraph::new(3, [(1, 4)]),
            Err(GraphError::NodeOutOfRange { node: 4, n: 3 })
        );
        assert_eq!(DiGraph::new(65, []), Err(GraphError::TooManyNodes { n: 65 }));
    }

    #[test]
    fn induced_subgraph_of_complete_graph_is_complete() {
        let k4 = DiGraph::complete(4).unwrap();
        let sub = k4.induced_subgraph(set(&[4])).unwrap();
        assert_eq!(sub.graph, DiGraph::complete(3).unwrap());
        assert_eq!(sub.labels(), &[1, 2, 3]);
    }

    #[test]
    fn induced_subgraph_filters_edges() {
        let c3 = DiGraph::cycle(3).unwrap();
        let sub = c3.induced_subgraph(set(&[3])).unwrap();
        assert_eq!(sub.graph.edges().collect::<Vec<_>>(), [(1, 2)]);
        assert_eq!(sub.lift(set(&[1, 2])), set(&[1, 2]));
    }

    #[test]
    fn induced_subgraph_relabels_and_lifts() {
        let c3 = DiGraph::cycle(3).unwrap();
        let sub = c3.induced_subgraph(set(&[1])).unwrap();
        // 2 -> 3 becomes 1 -> 2 locally
        assert_eq!(sub.graph.edges().collect::<Vec<_>>(), [(1, 2)]);
        assert_eq!(sub.to_original(1), 2);
        assert_eq!(sub.to_local(3), Some(2));
        assert_eq!(sub.to_local(1), None);
    }

    #[test]
    fn empty_fault_set_copies_graph() {
        let g = DiGraph::new(4, [(1, 2), (3, 1), (4, 3)]).unwrap();
        assert_eq!(g.induced_subgraph(NodeSet::empty()).unwrap().graph, g);
    }

    #[test]
    fn removing_everything_is_an_error() {
        let g = DiGraph::complete(2).unwrap();
        assert_eq!(g.induced_subgraph(set(&[1, 2])), Err(GraphError::EmptySubgraph));
    }

    #[test]
    fn from_code_enumerates_ordered_pairs() {
        let g = DiGraph::from_code(3, 0b11_1111).unwrap();
        assert_eq!(g, DiGraph::complete(3).unwrap());
        let first = DiGraph::from_code(3, 1).unwrap();
        assert_eq!(first.edges().collect::<Vec<_>>(), [(1, 2)]);
    }

    #[test]
    fn set_neighborhoods() {
        let g = DiGraph::new(4, [(1, 2), (3, 2), (4, 1), (2, 4)]).unwrap();
        assert_eq!(g.incoming_neighbors_of_set(set(&[1, 2])), set(&[3, 4]));
        assert_eq!(g.out_neighbors_in(set(&[2, 3]), set(&[2, 4])), set(&[2, 4]));
        assert_eq!(g.edges_between(set(&[3, 4]), set(&[1, 2])), [(3, 2), (4, 1)]);
    }
}
