//! The synchronous exact-consensus protocol: one iteration per fault set of
//! size exactly `f`, each a flooding phase of `|V| + 1` lock-step rounds
//! followed by a state update.

mod node;
mod update;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::Serialize;

use crate::auth::{check_replay, AuthError, Mint, ObservationPool, SignedObject};
use crate::conditions::{check_condition_s, Condition, WorkBudget};
use crate::graph::{subsets_of_size, unique_source_component, DiGraph, NodeId, NodeSet, Sources};
use crate::sim::{AdversaryError, SimError};

pub use node::{check_flood, check_value, SyncMessage, SyncNode};
pub use update::{update_state, UpdateOutcome, UpdateRule};

/// One iteration of the outer loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IterationEntry {
    pub index: usize,
    pub f_set: NodeSet,
    /// `S_F`, or `None` if `G_F` has several source components.
    pub source: Option<NodeSet>,
    /// `I_F`: nodes of `F` with an edge into `S_F`.
    pub incoming: NodeSet,
}

/// All `F` with `|F| = f` in lexicographic order, with `S_F` and `I_F`.
pub fn iteration_plan(g: &DiGraph, f: usize) -> Result<Vec<IterationEntry>, SimError> {
    let mut plan = Vec::new();
    for (index, f_set) in subsets_of_size(g.nodes(), f).enumerate() {
        let source = match unique_source_component(g, f_set)? {
            Sources::Unique(s) => Some(s),
            Sources::NotUnique(_) => None,
        };
        let incoming = source.map_or(NodeSet::empty(), |s| g.incoming_neighbors_of_set(s).intersection(f_set));
        plan.push(IterationEntry { index, f_set, source, incoming });
    }
    Ok(plan)
}

/// What a node needs to know about the current iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationView<'a> {
    pub graph: &'a DiGraph,
    pub f: usize,
    pub entry: &'a IterationEntry,
}

/// The adversary's handle during one round on behalf of one faulty node.
pub struct SyncAdversaryCtx<'a> {
    pub view: IterationView<'a>,
    pub round: usize,
    /// Rounds elapsed since the start of the execution.
    pub global_round: usize,
    pub faulty: NodeSet,
    pub node: NodeId,
    pub pool: &'a ObservationPool,
    mint: &'a mut Mint,
}

impl SyncAdversaryCtx<'_> {
    /// Signs as the faulty node being driven (or any other faulty node).
    pub fn keys(&mut self) -> crate::auth::NodeSigner<'_> {
        self.mint.faulty_signer(self.faulty, self.node)
    }

    pub fn keys_for(&mut self, node: NodeId) -> crate::auth::NodeSigner<'_> {
        self.mint.faulty_signer(self.faulty, node)
    }

    pub fn verify(&self, obj: &SignedObject) -> bool {
        self.mint.verify(obj)
    }
}

/// Strategy controlling all faulty nodes in a synchronous execution.
pub trait SyncAdversary {
    fn name(&self) -> alloc::string::String;

    fn setup(&mut self, _g: &DiGraph, _f: usize, _faulty: NodeSet, _inputs: &BTreeMap<NodeId, u8>) {}

    fn begin_iteration(&mut self, _view: &IterationView<'_>) {}

    /// Messages faulty `ctx.node` sends this round. `inbox` holds what it
    /// was sent last round.
    fn on_round(
        &mut self,
        ctx: &mut SyncAdversaryCtx<'_>,
        inbox: &[(NodeId, SyncMessage)],
    ) -> Result<Vec<(NodeId, SyncMessage)>, AuthError>;

    fn end_iteration(&mut self, _view: &IterationView<'_>) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SyncOptions {
    /// Run even if the graph violates Condition S.
    pub allow_violating: bool,
    pub mint_seed: u64,
    /// Keep every delivered message in the trace.
    pub record_messages: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub round: usize,
    pub from: NodeId,
    pub to: NodeId,
    pub message: SyncMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeUpdate {
    pub node: NodeId,
    pub before: u8,
    #[serde(flatten)]
    pub outcome: UpdateOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IterationTrace {
    #[serde(flatten)]
    pub entry: IterationEntry,
    /// Non-faulty values at the start of the iteration.
    pub start: BTreeMap<NodeId, u8>,
    /// Non-faulty `Y_v` at the end of flooding.
    pub y_sets: BTreeMap<NodeId, Vec<(NodeId, u8)>>,
    pub updates: Vec<NodeUpdate>,
    pub messages: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub deliveries: Vec<Delivery>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncExecution {
    pub n: usize,
    pub f: usize,
    pub faulty: NodeSet,
    pub adversary: alloc::string::String,
    pub inputs: BTreeMap<NodeId, u8>,
    /// Outputs of the non-faulty nodes.
    pub outputs: BTreeMap<NodeId, u8>,
    pub rounds: usize,
    pub messages: u64,
    pub iterations: Vec<IterationTrace>,
}

fn validate(g: &DiGraph, f: usize, inputs: &BTreeMap<NodeId, u8>, faulty: NodeSet) -> Result<(), SimError> {
    let n = g.node_count();
    if f < 1 || f >= n {
        return Err(SimError::InvalidScenario(format!("f must satisfy n > f >= 1 (n = {n}, f = {f})")));
    }
    if faulty.len() > f || !faulty.is_subset(g.nodes()) {
        return Err(SimError::InvalidScenario(format!("faulty set {faulty} must be at most f = {f} nodes of the graph")));
    }
    if inputs.len() != n || inputs.keys().any(|&v| !g.contains_node(v)) {
        return Err(SimError::InvalidScenario(format!("inputs must name each node 1..={n} once")));
    }
    if let Some((v, x)) = inputs.iter().find(|(_, &x)| x > 1) {
        return Err(SimError::InvalidScenario(format!("input of node {v} is {x}, expected 0 or 1")));
    }
    Ok(())
}

/// Runs the synchronous protocol to completion.
pub fn run_sync(
    g: &DiGraph,
    f: usize,
    inputs: &BTreeMap<NodeId, u8>,
    faulty: NodeSet,
    adversary: &mut dyn SyncAdversary,
    options: SyncOptions,
) -> Result<SyncExecution, SimError> {
    validate(g, f, inputs, faulty)?;
    if !options.allow_violating {
        let verdict = check_condition_s(g, f, WorkBudget(u64::MAX))?;
        if !verdict.holds {
            return Err(SimError::ConditionViolated { condition: Condition::S, f, witness: verdict.witness });
        }
    }
    let plan = iteration_plan(g, f)?;
    let n = g.node_count();
    let honest_ids = g.nodes().difference(faulty);
    let mut mint = Mint::new(options.mint_seed);
    let mut nodes: BTreeMap<NodeId, SyncNode> =
        honest_ids.iter().map(|v| (v, SyncNode::new(v, inputs[&v]))).collect();
    let mut pools: BTreeMap<NodeId, ObservationPool> =
        faulty.iter().map(|v| (v, ObservationPool::default())).collect();
    adversary.setup(g, f, faulty, inputs);

    let mut iterations = Vec::with_capacity(plan.len());
    let mut global_round = 0;
    let mut total_messages = 0;
    for entry in &plan {
        let view = IterationView { graph: g, f, entry };
        let start: BTreeMap<NodeId, u8> = nodes.iter().map(|(&v, s)| (v, s.value())).collect();
        let mut trace = IterationTrace {
            entry: entry.clone(),
            start,
            y_sets: BTreeMap::new(),
            updates: Vec::new(),
            messages: 0,
            deliveries: Vec::new(),
        };
        if entry.source.is_none() {
            // no unique source component: the iteration has nothing to flood
            for (&v, node) in &nodes {
                let outcome = UpdateOutcome {
                    value: node.value(),
                    rule: UpdateRule::Infeasible { reason: "no unique source component".into() },
                    used: Vec::new(),
                };
                trace.updates.push(NodeUpdate { node: v, before: node.value(), outcome });
            }
            iterations.push(trace);
            continue;
        }

        for node in nodes.values_mut() {
            node.begin_iteration();
        }
        adversary.begin_iteration(&view);
        let mut inbox: BTreeMap<NodeId, Vec<(NodeId, SyncMessage)>> = BTreeMap::new();
        for round in 0..=n {
            let mut sent: Vec<(NodeId, NodeId, SyncMessage)> = Vec::new();
            for (&v, node) in nodes.iter_mut() {
                let msgs = inbox.remove(&v).unwrap_or_default();
                let out = node
                    .step(&view, round, &msgs, &mut mint.honest_signer(v))
                    .map_err(|e| SimError::InternalInvariantBroken(format!("{e}")))?;
                sent.extend(out.into_iter().map(|(to, m)| (v, to, m)));
            }
            for u in faulty {
                let msgs = inbox.remove(&u).unwrap_or_default();
                let pool = pools.get_mut(&u).expect("pool per faulty node");
                for (_, m) in &msgs {
                    pool.record(m.object());
                }
                let out = {
                    let mut ctx = SyncAdversaryCtx {
                        view,
                        round,
                        global_round,
                        faulty,
                        node: u,
                        pool,
                        mint: &mut mint,
                    };
                    adversary.on_round(&mut ctx, &msgs).map_err(AdversaryError::from)?
                };
                for (to, m) in &out {
                    if !g.has_edge(u, *to) {
                        return Err(AdversaryError::TopologyBreach { from: u, to: *to }.into());
                    }
                    check_replay(&mint, pool, u, faulty, m.object()).map_err(AdversaryError::from)?;
                    pool.record(m.object());
                }
                sent.extend(out.into_iter().map(|(to, m)| (u, to, m)));
            }
            // the last round's sends are never delivered
            if round < n {
                sent.sort_by_key(|&(from, to, _)| (to, from));
                trace.messages += sent.len() as u64;
                for (from, to, message) in sent {
                    if options.record_messages {
                        trace.deliveries.push(Delivery { round, from, to, message: message.clone() });
                    }
                    inbox.entry(to).or_default().push((from, message));
                }
            }
            global_round += 1;
        }

        for (&v, node) in nodes.iter_mut() {
            trace.y_sets.insert(v, node.y().iter().copied().collect());
            let before = node.value();
            let outcome = node.update(&view).map_err(SimError::InternalInvariantBroken)?;
            if matches!(outcome.rule, UpdateRule::Infeasible { .. }) && !options.allow_violating {
                return Err(SimError::InternalInvariantBroken(format!(
                    "node {v}, iteration {}: {:?}",
                    entry.index, outcome.rule
                )));
            }
            trace.updates.push(NodeUpdate { node: v, before, outcome });
        }
        adversary.end_iteration(&view);
        total_messages += trace.messages;
        iterations.push(trace);
    }

    Ok(SyncExecution {
        n,
        f,
        faulty,
        adversary: adversary.name(),
        inputs: inputs.clone(),
        outputs: nodes.iter().map(|(&v, node)| (v, node.value())).collect(),
        rounds: global_round,
        messages: total_messages,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use alloc::vec;

    struct Silent;

    impl SyncAdversary for Silent {
        fn name(&self) -> String {
            "crash-at-start".into()
        }

        fn on_round(
            &mut self,
            _: &mut SyncAdversaryCtx<'_>,
            _: &[(NodeId, SyncMessage)],
        ) -> Result<Vec<(NodeId, SyncMessage)>, AuthError> {
            Ok(Vec::new())
        }
    }

    fn inputs(bits: &[u8]) -> BTreeMap<NodeId, u8> {
        bits.iter().enumerate().map(|(i, &b)| (i + 1, b)).collect()
    }

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn plan_for_k3() {
        let plan = iteration_plan(&DiGraph::complete(3).unwrap(), 1).unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(plan[2].f_set, set(&[3]));
        assert_eq!(plan[2].source, Some(set(&[1, 2])));
        assert_eq!(plan[2].incoming, set(&[3]));
    }

    #[test]
    fn k3_with_crashed_node() {
        let g = DiGraph::complete(3).unwrap();
        let ex = run_sync(&g, 1, &inputs(&[1, 1, 0]), set(&[3]), &mut Silent, SyncOptions::default())
            .unwrap();
        assert_eq!(ex.outputs, [(1, 1), (2, 1)].into_iter().collect());
        assert_eq!(ex.rounds, 3 * 4);
    }

    #[test]
    fn unanimous_inputs_survive() {
        for g in [DiGraph::complete(3).unwrap(), DiGraph::complete(4).unwrap()] {
            let n = g.node_count();
            let ex =
                run_sync(&g, 1, &inputs(&vec![0; n]), NodeSet::empty(), &mut Silent, SyncOptions::default())
                    .unwrap();
            assert!(ex.outputs.values().all(|&y| y == 0));
        }
    }

    #[test]
    fn crashed_flooding_reaches_everyone() {
        // F equal to the faulty set: every non-faulty node hears all of S_F
        let g = DiGraph::complete(4).unwrap();
        let ex = run_sync(&g, 1, &inputs(&[0, 1, 1, 0]), set(&[4]), &mut Silent, SyncOptions::default())
            .unwrap();
        let it = ex.iterations.iter().find(|t| t.entry.f_set == set(&[4])).unwrap();
        for y in it.y_sets.values() {
            let nodes: NodeSet = y.iter().map(|&(w, _)| w).collect();
            assert!(set(&[1, 2, 3]).is_subset(nodes));
        }
    }

    #[test]
    fn gate_rejects_violating_graph() {
        let g = DiGraph::cycle(3).unwrap();
        let err = run_sync(&g, 1, &inputs(&[0, 1, 1]), NodeSet::empty(), &mut Silent, SyncOptions::default())
            .unwrap_err();
        assert!(matches!(err, SimError::ConditionViolated { condition: Condition::S, .. }));
    }

    #[test]
    fn scenario_validation() {
        let g = DiGraph::complete(3).unwrap();
        let o = SyncOptions::default();
        assert!(run_sync(&g, 1, &inputs(&[0, 1]), NodeSet::empty(), &mut Silent, o).is_err());
        assert!(run_sync(&g, 1, &inputs(&[0, 1, 2]), NodeSet::empty(), &mut Silent, o).is_err());
        assert!(run_sync(&g, 1, &inputs(&[0, 1, 1]), set(&[1, 2]), &mut Silent, o).is_err());
    }
}
