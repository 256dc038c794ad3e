use std::collections::BTreeSet;

use byzlab_core::conditions::{check, chain_links, Condition, WorkBudget};
use byzlab_core::graph::{
    max_bipartite_matching, path_avoiding_internal, reach_set, source_components, strongly_connected_components,
    DiGraph, NodeId, NodeSet,
};
use proptest::prelude::*;

fn graph(max_n: usize) -> impl Strategy<Value = DiGraph> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1)).prop_map(move |bits| {
            let pairs = (1..=n).flat_map(|u| (1..=n).filter(move |&v| v != u).map(move |v| (u, v)));
            DiGraph::new(n, pairs.zip(bits).filter(|(_, b)| *b).map(|(e, _)| e)).unwrap()
        })
    })
}

/// `closure[u][v]`: a path from `u` to `v` (length zero allowed) avoiding `dead`.
fn closure(g: &DiGraph, dead: NodeSet) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut c = vec![vec![false; n + 1]; n + 1];
    for u in 1..=n {
        c[u][u] = !dead.contains(u);
        for v in 1..=n {
            if g.has_edge(u, v) && !dead.contains(u) && !dead.contains(v) {
                c[u][v] = true;
            }
        }
    }
    for k in 1..=n {
        for i in 1..=n {
            for j in 1..=n {
                if c[i][k] && c[k][j] {
                    c[i][j] = true;
                }
            }
        }
    }
    c
}

fn subset_of(g: &DiGraph, mask: u64) -> NodeSet {
    g.nodes().iter().filter(|v| mask >> (v - 1) & 1 == 1).collect()
}

fn brute_matching(left: &[NodeId], edges: &[(NodeId, NodeId)], used: &mut BTreeSet<NodeId>) -> usize {
    let Some((&l, rest)) = left.split_first() else { return 0 };
    let mut best = brute_matching(rest, edges, used);
    for &(a, r) in edges {
        if a == l && used.insert(r) {
            best = best.max(1 + brute_matching(rest, edges, used));
            used.remove(&r);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scc_matches_transitive_closure(g in graph(8)) {
        let c = closure(&g, NodeSet::empty());
        let comps = strongly_connected_components(&g, g.nodes());
        let mut seen = NodeSet::empty();
        for comp in &comps {
            prop_assert!(seen.is_disjoint(*comp));
            seen = seen.union(*comp);
            let first = comp.first().unwrap();
            for v in g.nodes() {
                prop_assert_eq!(comp.contains(v), c[first][v] && c[v][first]);
            }
        }
        prop_assert_eq!(seen, g.nodes());

        // a source component has no incoming edge from outside
        for s in source_components(&g) {
            prop_assert!(comps.contains(&s));
            prop_assert!(g.incoming_neighbors_of_set(s).is_subset(s));
        }
    }

    #[test]
    fn reach_set_matches_closure(g in graph(8), mask in any::<u64>(), u in 1usize..=8) {
        let f_set = subset_of(&g, mask);
        prop_assume!(u <= g.node_count() && !f_set.contains(u));
        let c = closure(&g, f_set);
        let expected: NodeSet = g.nodes().iter().filter(|&v| c[v][u]).collect();
        prop_assert_eq!(reach_set(&g, f_set, u).unwrap(), expected);
    }

    #[test]
    fn reach_conditions_weaken_as_rho_drops(g in graph(6), f in 1usize..=2) {
        prop_assume!(g.node_count() > f);
        let b = WorkBudget::default();
        for c in [Condition::OneReach, Condition::TwoReach, Condition::ThreeReach] {
            let mut prev = true;
            for rho in 1..=g.node_count() + 1 {
                let v = check(&g, c, f, Some(rho), b).unwrap();
                prop_assert!(prev || !v.holds, "{} holds at rho {} but not at rho {}", c, rho, rho - 1);
                prop_assert_eq!(v.holds, v.witness.is_none());
                if let Some(w) = &v.witness {
                    prop_assert!(w.is_genuine(&g, f, rho));
                }
                prev = v.holds;
            }
        }
    }

    #[test]
    fn chain_verdicts_are_monotone(g in graph(6)) {
        prop_assume!(g.node_count() > 1);
        let b = WorkBudget::default();
        let holds: Vec<bool> = chain_links(1)
            .iter()
            .map(|&(c, rho)| check(&g, c, 1, Some(rho), b).unwrap().holds)
            .collect();
        for pair in holds.windows(2) {
            prop_assert!(pair[0] || !pair[1], "{:?}", holds);
        }
    }

    #[test]
    fn matching_is_maximum(nl in 0usize..=5, nr in 0usize..=5, bits in any::<u32>()) {
        let left: Vec<NodeId> = (1..=nl).collect();
        let right: Vec<NodeId> = (nl + 1..=nl + nr).collect();
        let edges: Vec<(NodeId, NodeId)> = left
            .iter()
            .flat_map(|&l| right.iter().map(move |&r| (l, r)))
            .enumerate()
            .filter(|(i, _)| bits >> i & 1 == 1)
            .map(|(_, e)| e)
            .collect();
        let m = max_bipartite_matching(left.iter().copied().collect(), right.iter().copied().collect(), &edges)
            .unwrap();
        let pairs = m.pairs();
        prop_assert!(pairs.iter().all(|e| edges.contains(e)));
        prop_assert_eq!(pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().len(), pairs.len());
        prop_assert_eq!(pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().len(), pairs.len());
        prop_assert_eq!(m.len(), brute_matching(&left, &edges, &mut BTreeSet::new()));
    }

    #[test]
    fn avoiding_paths_are_real_and_found(g in graph(7), mask in any::<u64>(), s in 1usize..=7, t in 1usize..=7) {
        prop_assume!(s <= g.node_count() && t <= g.node_count());
        let forbidden = subset_of(&g, mask);
        let path = path_avoiding_internal(&g, s, t, forbidden);
        match path {
            Some(p) => {
                prop_assert_eq!(p.first(), Some(&s));
                prop_assert_eq!(p.last(), Some(&t));
                prop_assert!(p.windows(2).all(|w| g.has_edge(w[0], w[1])));
                prop_assert!(p.iter().skip(1).take(p.len().saturating_sub(2)).all(|&v| !forbidden.contains(v)));
                prop_assert_eq!(p.iter().collect::<BTreeSet<_>>().len(), p.len());
            }
            None => {
                let alive = g.nodes().difference(forbidden).with(s).with(t);
                let c = closure(&g, g.nodes().difference(alive));
                // any walk over allowed nodes shortens to a simple path with s and t only at its ends
                prop_assert!(!c[s][t]);
            }
        }
    }
}
