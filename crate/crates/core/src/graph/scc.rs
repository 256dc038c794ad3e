use alloc::vec;
use alloc::vec::Vec;

use super::{DiGraph, GraphError, NodeId, NodeSet};

/// Source components of `G_F`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sources {
    Unique(NodeSet),
    /// Two or more source components, sorted; the violation witness.
    NotUnique(Vec<NodeSet>),
}

impl Sources {
    pub fn unique(&self) -> Option<NodeSet> {
        match self {
            Sources::Unique(s) => Some(*s),
            Sources::NotUnique(_) => None,
        }
    }

    pub fn components(&self) -> Vec<NodeSet> {
        match self {
            Sources::Unique(s) => vec![*s],
            Sources::NotUnique(all) => all.clone(),
        }
    }
}

struct Tarjan<'a> {
    g: &'a DiGraph,
    alive: NodeSet,
    index: Vec<Option<usize>>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<NodeId>,
    next: usize,
    out: Vec<NodeSet>,
}

impl Tarjan<'_> {
    // recursion depth is bounded by MAX_NODES
    fn visit(&mut self, v: NodeId) {
        self.index[v] = Some(self.next);
        self.low[v] = self.next;
        self.next += 1;
        self.stack.push(v);
        self.on_stack[v] = true;

        for w in self.g.out_neighbors(v).intersection(self.alive) {
            match self.index[w] {
                None => {
                    self.visit(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                }
                Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                Some(_) => {}
            }
        }

        if Some(self.low[v]) == self.index[v] {
            let mut comp = NodeSet::empty();
            while let Some(w) = self.stack.pop() {
                self.on_stack[w] = false;
                comp.insert(w);
                if w == v {
                    break;
                }
            }
            self.out.push(comp);
        }
    }
}

/// Strongly connected components of the subgraph induced by `alive`,
/// sorted lexicographically.
pub fn strongly_connected_components(g: &DiGraph, alive: NodeSet) -> Vec<NodeSet> {
    let n = g.node_count();
    let alive = alive.intersection(g.nodes());
    let mut t = Tarjan {
        g,
        alive,
        index: vec![None; n + 1],
        low: vec![0; n + 1],
        on_stack: vec![false; n + 1],
        stack: Vec::with_capacity(n),
        next: 0,
        out: Vec::new(),
    };
    for v in alive {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    let mut out = t.out;
    out.sort();
    out
}

/// Source components of the subgraph induced by `alive`: SCCs with no edge
/// entering from another node of `alive`.
pub fn source_components_within(g: &DiGraph, alive: NodeSet) -> Vec<NodeSet> {
    strongly_connected_components(g, alive)
        .into_iter()
        .filter(|&comp| g.incoming_neighbors_of_set(comp).is_disjoint(alive))
        .collect()
}

pub fn source_components(g: &DiGraph) -> Vec<NodeSet> {
    source_components_within(g, g.nodes())
}

/// The source component(s) of `G_F`, in the identifiers of `g`.
pub fn unique_source_component(g: &DiGraph, f_set: NodeSet) -> Result<Sources, GraphError> {
    g.check_set(f_set)?;
    let alive = g.nodes().difference(f_set);
    if alive.is_empty() {
        return Err(GraphError::EmptySubgraph);
    }
    let mut comps = source_components_within(g, alive);
    Ok(if comps.len() == 1 {
        Sources::Unique(comps.pop().expect("one component"))
    } else {
        Sources::NotUnique(comps)
    })
}
