use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{max_bipartite_matching, DiGraph, NodeId, NodeSet};

/// How a node's state changed in one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum UpdateRule {
    /// `Y_v` lacks a value from some node of `S_F`.
    GateFailed,
    /// At least `2f + 1` distinct nodes: plain majority, ties to 0.
    Majority,
    /// At most `2f` distinct nodes: values of matched `S_F` nodes dropped.
    Matching { p: usize, k: usize, matching: Vec<(NodeId, NodeId)> },
    /// The graph lacks the structure the rule needs (only possible when
    /// the condition check was overridden); the value is kept.
    Infeasible { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub value: u8,
    #[serde(flatten)]
    pub rule: UpdateRule,
    /// The `(node, value)` pairs the majority was taken over.
    pub used: Vec<(NodeId, u8)>,
}

impl UpdateOutcome {
    pub fn applied(&self) -> bool {
        matches!(self.rule, UpdateRule::Majority | UpdateRule::Matching { .. })
    }
}

fn majority(values: &[(NodeId, u8)]) -> u8 {
    let ones = values.iter().filter(|&&(_, b)| b == 1).count();
    u8::from(ones > values.len() - ones)
}

/// State update for node with current value `s` from its flood result `y`,
/// in the iteration for `f_set` with source component `source`.
///
/// `Err` carries a description of an impossible situation (odd-count or
/// matching invariants); the caller decides whether that is fatal.
pub fn update_state(
    g: &DiGraph,
    f: usize,
    f_set: NodeSet,
    source: NodeSet,
    s: u8,
    y: &BTreeSet<(NodeId, u8)>,
) -> Result<UpdateOutcome, String> {
    let unchanged = |rule| UpdateOutcome { value: s, rule, used: Vec::new() };

    // keep (w, 0) when both (w, 0) and (w, 1) are present
    let mut values: BTreeMap<NodeId, u8> = BTreeMap::new();
    for &(w, b) in y {
        values.entry(w).and_modify(|v| *v = (*v).min(b)).or_insert(b);
    }
    if !source.iter().all(|w| values.contains_key(&w)) {
        return Ok(unchanged(UpdateRule::GateFailed));
    }

    if values.len() >= 2 * f + 1 {
        let used: Vec<_> = values.into_iter().collect();
        return Ok(UpdateOutcome { value: majority(&used), rule: UpdateRule::Majority, used });
    }

    if source.len() <= f {
        return Ok(unchanged(UpdateRule::Infeasible {
            reason: format!("|S_F| = {} is at most f = {f}", source.len()),
        }));
    }
    let p = source.len() - f;
    let present: NodeSet = values.keys().copied().collect();
    let missing = f_set.difference(present);
    let k = missing.len();
    if k < p {
        return Err(format!("k = {k} < p = {p} with {} distinct values", values.len()));
    }
    let need = k - p + 1;
    let edges = g.edges_between(missing, source);
    let full = max_bipartite_matching(missing, source, &edges).map_err(|e| format!("{e}"))?;
    if full.len() < need {
        return Ok(unchanged(UpdateRule::Infeasible {
            reason: format!("maximum matching {} below k - p + 1 = {need}", full.len()),
        }));
    }
    let matching = full.truncated(need);
    let dropped = matching.right_nodes();
    let used: Vec<_> = values.into_iter().filter(|(w, _)| !dropped.contains(*w)).collect();
    let expected = 2 * f + 2 * p - 2 * k - 1;
    if used.len() != expected || used.len() % 2 == 0 {
        return Err(format!("{} values left, expected odd count {expected}", used.len()));
    }
    Ok(UpdateOutcome {
        value: majority(&used),
        rule: UpdateRule::Matching { p, k, matching: matching.pairs().to_vec() },
        used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    fn y(pairs: &[(NodeId, u8)]) -> BTreeSet<(NodeId, u8)> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn strict_majority() {
        let k4 = DiGraph::complete(4).unwrap();
        let out = update_state(&k4, 1, set(&[4]), set(&[1, 2, 3]), 1, &y(&[(1, 0), (2, 0), (3, 1)]))
            .unwrap();
        assert_eq!(out.rule, UpdateRule::Majority);
        assert_eq!(out.value, 0);
    }

    #[test]
    fn tie_goes_to_zero() {
        let k5 = DiGraph::complete(5).unwrap();
        let out = update_state(
            &k5,
            1,
            set(&[5]),
            set(&[1, 2, 3, 4]),
            1,
            &y(&[(1, 0), (2, 1), (3, 0), (4, 1)]),
        )
        .unwrap();
        assert_eq!(out.rule, UpdateRule::Majority);
        assert_eq!(out.value, 0);
    }

    #[test]
    fn matching_drops_partner_value() {
        // x = 1 faulty candidate, S_F = {q, r} = {2, 3}, edge 1 -> 2
        let g = DiGraph::new(3, [(1, 2), (2, 3), (3, 2)]).unwrap();
        let out = update_state(&g, 1, set(&[1]), set(&[2, 3]), 0, &y(&[(2, 0), (3, 1)])).unwrap();
        assert_eq!(out.rule, UpdateRule::Matching { p: 1, k: 1, matching: alloc::vec![(1, 2)] });
        assert_eq!(out.used, alloc::vec![(3, 1)]);
        assert_eq!(out.value, 1);
    }

    #[test]
    fn gate_and_duplicates() {
        let k3 = DiGraph::complete(3).unwrap();
        let out = update_state(&k3, 1, set(&[3]), set(&[1, 2]), 1, &y(&[(1, 0)])).unwrap();
        assert_eq!(out.rule, UpdateRule::GateFailed);
        assert_eq!(out.value, 1);
        // (3,0) and (3,1) collapse to (3,0); three distinct nodes, majority 0
        let out =
            update_state(&k3, 1, set(&[3]), set(&[1, 2]), 1, &y(&[(1, 1), (2, 0), (3, 0), (3, 1)]))
                .unwrap();
        assert_eq!(out.used, alloc::vec![(1, 1), (2, 0), (3, 0)]);
        assert_eq!(out.value, 0);
    }

    #[test]
    fn small_source_is_infeasible() {
        let c3 = DiGraph::cycle(3).unwrap();
        let out = update_state(&c3, 1, set(&[3]), set(&[1]), 1, &y(&[(1, 0)])).unwrap();
        assert!(matches!(out.rule, UpdateRule::Infeasible { .. }));
        assert_eq!(out.value, 1);
    }
}
