use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{source_table, ConditionError};
use crate::graph::{
    max_bipartite_matching, path_avoiding_internal, subsets_of_size, DiGraph, NodeId, NodeSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    /// Paths from `S_F` to every node avoiding `F` internally.
    SourceReach,
    /// `|S_F| >= 2f + 1 - |F|`.
    ComponentSize,
    /// Every `k`-subset of `F` has at least `k + 1` out-neighbours in `S_F`.
    OutNeighbors,
    /// Every `k`-subset of `F` matches at least `k - p + 1` nodes of `S_F`.
    MatchSize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "snake_case")]
pub enum LemmaViolation {
    NoAvoidingPath { f_set: NodeSet, from: NodeId, to: NodeId },
    PathTooLong { f_set: NodeSet, from: NodeId, to: NodeId, edges: usize },
    ComponentTooSmall { f_set: NodeSet, source: NodeSet, bound: usize },
    FewOutNeighbors { f_set: NodeSet, subset: NodeSet, out_neighbors: NodeSet, bound: usize },
    SmallMatching { f_set: NodeSet, subset: NodeSet, size: usize, bound: usize },
}

impl LemmaViolation {
    pub fn kind(&self) -> LemmaKind {
        match self {
            LemmaViolation::NoAvoidingPath { .. } | LemmaViolation::PathTooLong { .. } => {
                LemmaKind::SourceReach
            }
            LemmaViolation::ComponentTooSmall { .. } => LemmaKind::ComponentSize,
            LemmaViolation::FewOutNeighbors { .. } => LemmaKind::OutNeighbors,
            LemmaViolation::SmallMatching { .. } => LemmaKind::MatchSize,
        }
    }
}

/// Instances examined per lemma, and every violation found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaAudit {
    pub source_reach: u64,
    pub component_size: u64,
    pub out_neighbors: u64,
    pub match_size: u64,
    pub violations: Vec<LemmaViolation>,
}

impl LemmaAudit {
    pub fn checks(&self) -> u64 {
        self.source_reach + self.component_size + self.out_neighbors + self.match_size
    }

    pub fn merge(&mut self, other: LemmaAudit) {
        self.source_reach += other.source_reach;
        self.component_size += other.component_size;
        self.out_neighbors += other.out_neighbors;
        self.match_size += other.match_size;
        self.violations.extend(other.violations);
    }
}

/// Checks the structural consequences of Condition S on `g`. Returns `None`
/// when some `G_F` lacks a unique source component or one with at least
/// `f + 1` nodes, since the lemmas assume Condition S.
pub fn audit_lemmas(g: &DiGraph, f: usize) -> Result<Option<LemmaAudit>, ConditionError> {
    if f < 1 || f >= g.node_count() {
        return Err(ConditionError::InvalidParams { n: g.node_count(), f });
    }
    let table = match source_table(g, f)? {
        Ok(t) if t.iter().all(|(_, s)| s.len() > f) => t,
        _ => return Ok(None),
    };
    let n = g.node_count();
    let mut audit = LemmaAudit::default();

    for &(f_set, source) in &table {
        for w in source {
            for v in g.nodes() {
                audit.source_reach += 1;
                match path_avoiding_internal(g, w, v, f_set) {
                    None => audit.violations.push(LemmaViolation::NoAvoidingPath {
                        f_set,
                        from: w,
                        to: v,
                    }),
                    Some(p) if p.len() > n => audit.violations.push(LemmaViolation::PathTooLong {
                        f_set,
                        from: w,
                        to: v,
                        edges: p.len() - 1,
                    }),
                    Some(_) => {}
                }
            }
        }

        audit.component_size += 1;
        let bound = (2 * f + 1).saturating_sub(f_set.len());
        if source.len() < bound {
            audit.violations.push(LemmaViolation::ComponentTooSmall { f_set, source, bound });
        }

        if f_set.len() != f || source.len() > 2 * f {
            continue;
        }
        let p = source.len() - f;
        for k in p..=f {
            for subset in subsets_of_size(f_set, k) {
                audit.out_neighbors += 1;
                let out = g.out_neighbors_in(subset, source);
                if out.len() < k + 1 {
                    audit.violations.push(LemmaViolation::FewOutNeighbors {
                        f_set,
                        subset,
                        out_neighbors: out,
                        bound: k + 1,
                    });
                }

                audit.match_size += 1;
                let edges = g.edges_between(subset, source);
                let m = max_bipartite_matching(subset, source, &edges)?;
                if m.len() < k - p + 1 {
                    audit.violations.push(LemmaViolation::SmallMatching {
                        f_set,
                        subset,
                        size: m.len(),
                        bound: k - p + 1,
                    });
                }
            }
        }
    }
    Ok(Some(audit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graphs_are_clean() {
        for (n, f) in [(3, 1), (4, 1), (5, 2), (6, 2)] {
            let a = audit_lemmas(&DiGraph::complete(n).unwrap(), f).unwrap().unwrap();
            assert!(a.violations.is_empty(), "K{n}: {:?}", a.violations);
            assert!(a.source_reach > 0 && a.component_size > 0);
        }
    }

    #[test]
    fn tight_sources_exercise_matching() {
        // K3, f = 1: |F| = 1 gives |S_F| = 2 = 2f, p = 1, k = 1
        let a = audit_lemmas(&DiGraph::complete(3).unwrap(), 1).unwrap().unwrap();
        assert_eq!(a.out_neighbors, 3);
        assert_eq!(a.match_size, 3);
    }

    #[test]
    fn not_applicable_without_condition_s() {
        assert_eq!(audit_lemmas(&DiGraph::cycle(3).unwrap(), 1).unwrap(), None);
    }
}
