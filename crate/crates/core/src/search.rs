//! Seeded graph generation and witness search.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditions::{
    chain_links, check, check_condition_a, check_condition_s, ConditionError, WorkBudget, Witness,
};
use crate::graph::{DiGraph, NodeId};

/// `G(n, p)` digraph: every ordered pair is an edge with probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> DiGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_graph_with(&mut rng, n, p)
}

fn random_graph_with(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DiGraph {
    let p = p.clamp(0.0, 1.0);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for u in 1..=n {
        for v in 1..=n {
            if u != v && rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    DiGraph::new(n, edges).expect("node count checked by caller")
}

/// `count` seeded random graphs with `n` drawn from `n_min..=n_max` and
/// edge probability from `[0.3, 0.95)`.
pub fn random_corpus(count: usize, n_min: usize, n_max: usize, seed: u64) -> Vec<DiGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(n_min..=n_max);
            let p = rng.random_range(0.3..0.95);
            random_graph_with(&mut rng, n, p)
        })
        .collect()
}

/// Seeded random graphs satisfying `keep`, tried at most `attempts` times.
pub fn filtered_corpus(
    count: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
    attempts: usize,
    mut keep: impl FnMut(&DiGraph) -> bool,
) -> Vec<DiGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..attempts {
        if out.len() == count {
            break;
        }
        let n = rng.random_range(n_min..=n_max);
        let p = rng.random_range(0.4..1.0);
        let g = random_graph_with(&mut rng, n, p);
        if keep(&g) {
            out.push(g);
        }
    }
    out
}

/// Graphs satisfying Condition S for `f`.
pub fn condition_s_corpus(count: usize, n_max: usize, f: usize, seed: u64) -> Vec<DiGraph> {
    let budget = WorkBudget::default();
    filtered_corpus(count, f + 2, n_max, seed, count * 200, |g| {
        check_condition_s(g, f, budget).is_ok_and(|v| v.holds)
    })
}

/// Graphs satisfying Condition A for `f`.
pub fn condition_a_corpus(count: usize, n_max: usize, f: usize, seed: u64) -> Vec<DiGraph> {
    let budget = WorkBudget::default();
    filtered_corpus(count, 3 * f + 1, n_max, seed, count * 200, |g| {
        check_condition_a(g, f, budget).is_ok_and(|v| v.holds)
    })
}

/// Verdicts of the five chain links, weakest first.
pub fn chain_pattern(g: &DiGraph, f: usize, budget: WorkBudget) -> Result<[bool; 5], ConditionError> {
    let mut out = [false; 5];
    for (slot, (c, rho)) in out.iter_mut().zip(chain_links(f)) {
        *slot = check(g, c, f, Some(rho), budget)?.holds;
    }
    Ok(out)
}

/// A graph satisfying chain link `link` but not link `link + 1`.
/// Exhaustive over `n <= 4` first, then seeded random graphs up to `n_max`
/// nodes. Stops at the first hit.
pub fn find_separation(link: usize, f: usize, n_max: usize, seed: u64, attempts: usize) -> Option<DiGraph> {
    assert!(link < 4, "the chain has four adjacent pairs");
    let budget = WorkBudget::default();
    let links = chain_links(f);
    let separates = |g: &DiGraph| {
        let holds = |i: usize| check(g, links[i].0, f, Some(links[i].1), budget).is_ok_and(|v| v.holds);
        holds(link) && !holds(link + 1)
    };
    for n in f + 2..=n_max.min(4) {
        let pairs = n * (n - 1);
        if let Some(g) = (0..1u64 << pairs).map(|code| DiGraph::from_code(n, code).unwrap()).find(separates) {
            return Some(g);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..attempts).find_map(|_| {
        let n = rng.random_range(5..=n_max.max(5));
        let p = rng.random_range(0.3..1.0);
        let g = random_graph_with(&mut rng, n, p);
        separates(&g).then_some(g)
    })
}

/// A graph whose source components are all unique and large enough but two
/// of them meet in at most `f` nodes.
pub fn find_small_intersection_graph(f: usize, n_max: usize, seed: u64, attempts: usize) -> Option<DiGraph> {
    let budget = WorkBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..attempts).find_map(|_| {
        let n = rng.random_range(2 * f + 2..=n_max);
        let p = rng.random_range(0.3..0.9);
        let g = random_graph_with(&mut rng, n, p);
        let w = check_condition_a(&g, f, budget).ok()?.witness;
        matches!(w, Some(Witness::SmallIntersection { .. })).then_some(g)
    })
}

/// Drops edges in order while `keep` still holds. The result is minimal:
/// removing any one remaining edge breaks `keep`.
pub fn sparsify(g: &DiGraph, mut keep: impl FnMut(&DiGraph) -> bool) -> DiGraph {
    let mut edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut i = 0;
    while i < edges.len() {
        let mut trial = edges.clone();
        trial.remove(i);
        let h = DiGraph::new(g.node_count(), trial.iter().copied()).expect("subgraph of a valid graph");
        if keep(&h) {
            edges = trial;
        } else {
            i += 1;
        }
    }
    DiGraph::new(g.node_count(), edges).expect("subgraph of a valid graph")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        assert_eq!(random_graph(6, 0.5, 3), random_graph(6, 0.5, 3));
        assert_eq!(random_corpus(5, 3, 8, 1), random_corpus(5, 3, 8, 1));
        assert_eq!(random_graph(5, 1.0, 0), DiGraph::complete(5).unwrap());
        assert_eq!(random_graph(5, 0.0, 0).edge_count(), 0);
    }

    #[test]
    fn corpora_satisfy_their_condition() {
        let b = WorkBudget::default();
        for g in condition_s_corpus(5, 6, 1, 2) {
            assert!(check_condition_s(&g, 1, b).unwrap().holds);
        }
        let a = condition_a_corpus(5, 7, 1, 2);
        assert_eq!(a.len(), 5);
        for g in a {
            assert!(check_condition_a(&g, 1, b).unwrap().holds);
        }
    }

    #[test]
    fn sparsify_is_minimal() {
        let b = WorkBudget::default();
        let holds = |g: &DiGraph| check_condition_s(g, 1, b).unwrap().holds;
        let g = sparsify(&DiGraph::complete(5).unwrap(), holds);
        assert!(holds(&g));
        assert!(g.edge_count() < 20);
        for (u, v) in g.edges() {
            let fewer = DiGraph::new(5, g.edges().filter(|&e| e != (u, v))).unwrap();
            assert!(!holds(&fewer));
        }
    }
}
