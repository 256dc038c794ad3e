use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{DiGraph, GraphError, NodeId, NodeSet};

/// Nodes of `alive` with a directed path to `u` inside the subgraph induced
/// by `alive` (reverse breadth-first search). `u` must be alive.
pub fn reach_within(g: &DiGraph, alive: NodeSet, u: NodeId) -> NodeSet {
    let mut seen = NodeSet::singleton(u);
    let mut frontier = seen;
    while !frontier.is_empty() {
        let mut next = NodeSet::empty();
        for v in frontier {
            next = next.union(g.in_neighbors(v));
        }
        frontier = next.intersection(alive).difference(seen);
        seen = seen.union(frontier);
    }
    seen
}

/// `reach_u(F)`: nodes of `V - F` that have a directed path to `u` in `G_F`.
pub fn reach_set(g: &DiGraph, f_set: NodeSet, u: NodeId) -> Result<NodeSet, GraphError> {
    g.check_set(f_set)?;
    g.check_node(u)?;
    if f_set.contains(u) {
        return Err(GraphError::NodeInFaultSet { node: u });
    }
    Ok(reach_within(g, g.nodes().difference(f_set), u))
}

/// Shortest directed path from `src` to `dst` none of whose internal nodes
/// lie in `forbidden_internal`. Endpoints may themselves be forbidden.
pub fn path_avoiding_internal(
    g: &DiGraph,
    src: NodeId,
    dst: NodeId,
    forbidden_internal: NodeSet,
) -> Option<Vec<NodeId>> {
    if !g.contains_node(src) || !g.contains_node(dst) {
        return None;
    }
    if src == dst {
        return Some(vec![src]);
    }
    let n = g.node_count();
    let mut parent: Vec<Option<NodeId>> = vec![None; n + 1];
    let mut visited = NodeSet::singleton(src);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        // a forbidden node may end a path but never continue one
        if v != src && forbidden_internal.contains(v) {
            continue;
        }
        for w in g.out_neighbors(v).difference(visited) {
            visited.insert(w);
            parent[w] = Some(v);
            if w == dst {
                let mut path = vec![dst];
                let mut cur = dst;
                while let Some(p) = parent[cur] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(w);
        }
    }
    None
}
