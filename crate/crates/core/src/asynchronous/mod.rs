//! The asynchronous approximate-consensus protocol, run by an event-driven
//! kernel with a deterministic scheduler and logical time.

mod node;
mod scheduler;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::auth::{check_replay, AuthError, Mint, NodeSigner, ObservationPool, SignedObject};
use crate::conditions::{check_condition_a, Condition, WorkBudget};
use crate::graph::{reach_within, subsets_up_to, unique_source_component, DiGraph, NodeId, NodeSet, Sources};
use crate::sim::{AdversaryError, SimError};

pub use node::{check_report, trimmed_midpoint, AsyncNode, Effects, RoundRecord, UpdateError};
pub use scheduler::{DelayModel, Schedule, WithholdRule, DEFAULT_HORIZON_PER_ROUND};
use scheduler::{Event, EventQueue};

/// Number of rounds needed for agreement within `epsilon` when inputs lie
/// in `[0, 1]`: the least `r` with `2^-r <= epsilon`.
pub fn rounds_for(epsilon: f64) -> Result<usize, SimError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SimError::InvalidScenario(format!("epsilon must be positive and finite (got {epsilon})")));
    }
    let mut r = 0;
    let mut width = 1.0f64;
    while width > epsilon {
        width /= 2.0;
        r += 1;
    }
    Ok(r)
}

/// One candidate `F_v` for the completeness check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub f_set: NodeSet,
    /// `S_F`, or `None` if `G_F` has several source components.
    pub source: Option<NodeSet>,
}

/// Static knowledge shared by every node of an execution.
#[derive(Debug, Clone)]
pub struct AsyncView<'a> {
    pub graph: &'a DiGraph,
    pub f: usize,
    pub r_max: usize,
    /// Accept graphs violating Condition A: with several source components
    /// a node uses those that reach it, and an empty trim keeps its value.
    pub degraded: bool,
    /// All `F` with `|F| <= f`, size-ascending then lexicographic.
    pub candidates: Vec<Candidate>,
    fallback: BTreeMap<(usize, NodeId), NodeSet>,
}

impl<'a> AsyncView<'a> {
    pub fn new(graph: &'a DiGraph, f: usize, r_max: usize, degraded: bool) -> Result<Self, SimError> {
        let mut candidates = Vec::new();
        let mut fallback = BTreeMap::new();
        for (i, f_set) in subsets_up_to(graph.nodes(), f).enumerate() {
            let source = match unique_source_component(graph, f_set)? {
                Sources::Unique(s) => Some(s),
                Sources::NotUnique(components) => {
                    if degraded {
                        let alive = graph.nodes().difference(f_set);
                        for v in alive {
                            let reaching: NodeSet = components
                                .iter()
                                .filter(|c| c.first().is_some_and(|w| reach_within(graph, alive, w).contains(v)))
                                .fold(NodeSet::empty(), |acc, c| acc.union(*c));
                            fallback.insert((i, v), reaching);
                        }
                    }
                    None
                }
            };
            candidates.push(Candidate { f_set, source });
        }
        Ok(Self { graph, f, r_max, degraded, candidates, fallback })
    }

    /// Source component node `v` checks against for candidate `i`.
    pub fn source_for(&self, i: usize, v: NodeId) -> Option<NodeSet> {
        match self.candidates[i].source {
            Some(s) => Some(s),
            None => self.fallback.get(&(i, v)).copied().filter(|s| !s.is_empty()),
        }
    }
}

/// A message the adversary wants sent. Without `send_at` it leaves now;
/// without `deliver_at` the scheduler picks the delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsyncSend {
    pub to: NodeId,
    pub object: SignedObject,
    pub send_at: Option<u64>,
    pub deliver_at: Option<u64>,
}

impl AsyncSend {
    pub fn now(to: NodeId, object: SignedObject) -> Self {
        Self { to, object, send_at: None, deliver_at: None }
    }
}

/// The adversary's handle while acting for one faulty node.
pub struct AsyncAdversaryCtx<'a, 'g> {
    pub view: &'a AsyncView<'g>,
    pub now: u64,
    pub faulty: NodeSet,
    pub node: NodeId,
    pub pool: &'a ObservationPool,
    mint: &'a mut Mint,
}

impl AsyncAdversaryCtx<'_, '_> {
    pub fn keys(&mut self) -> NodeSigner<'_> {
        self.mint.faulty_signer(self.faulty, self.node)
    }

    pub fn keys_for(&mut self, node: NodeId) -> NodeSigner<'_> {
        self.mint.faulty_signer(self.faulty, node)
    }

    pub fn verify(&self, obj: &SignedObject) -> bool {
        self.mint.verify(obj)
    }
}

/// Strategy controlling all faulty nodes in an asynchronous execution.
pub trait AsyncAdversary {
    fn name(&self) -> String;

    fn setup(&mut self, _view: &AsyncView<'_>, _faulty: NodeSet, _inputs: &BTreeMap<NodeId, f64>) {}

    /// Called once per faulty node at time 0.
    fn start(&mut self, ctx: &mut AsyncAdversaryCtx<'_, '_>) -> Result<Vec<AsyncSend>, AuthError>;

    /// A message from `from` reached faulty `ctx.node`.
    fn on_deliver(
        &mut self,
        ctx: &mut AsyncAdversaryCtx<'_, '_>,
        from: NodeId,
        obj: &SignedObject,
    ) -> Result<Vec<AsyncSend>, AuthError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AsyncOptions {
    /// Run even if the graph violates Condition A.
    pub allow_violating: bool,
    pub mint_seed: u64,
    pub schedule: Schedule,
    pub record_messages: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AsyncDelivery {
    pub sent_at: u64,
    /// Position among the messages sent on this edge.
    pub index: u64,
    pub time: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub object: SignedObject,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsyncExecution {
    pub n: usize,
    pub f: usize,
    pub epsilon: f64,
    pub r_max: usize,
    pub faulty: NodeSet,
    pub adversary: String,
    pub inputs: BTreeMap<NodeId, f64>,
    /// Outputs of the non-faulty nodes that finished.
    pub outputs: BTreeMap<NodeId, f64>,
    pub output_times: BTreeMap<NodeId, u64>,
    /// Non-faulty nodes without output when the queue drained.
    pub blocked: NodeSet,
    pub rounds: BTreeMap<NodeId, Vec<RoundRecord>>,
    pub messages: u64,
    pub events: u64,
    pub end_time: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub deliveries: Vec<AsyncDelivery>,
}

fn validate(g: &DiGraph, f: usize, inputs: &BTreeMap<NodeId, f64>, faulty: NodeSet) -> Result<(), SimError> {
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
    if let Some((v, x)) = inputs.iter().find(|(_, &x)| !(0.0..=1.0).contains(&x)) {
        return Err(SimError::InvalidScenario(format!("input of node {v} is {x}, expected a real in [0, 1]")));
    }
    Ok(())
}

struct Kernel<'a, 'g> {
    view: &'a AsyncView<'g>,
    faulty: NodeSet,
    mint: Mint,
    queue: EventQueue,
    pools: BTreeMap<NodeId, ObservationPool>,
    record: bool,
    deliveries: Vec<AsyncDelivery>,
}

impl Kernel<'_, '_> {
    /// Validates and carries out an adversary send from `from` at `now`.
    fn adversary_send(
        &mut self,
        from: NodeId,
        to: NodeId,
        object: SignedObject,
        now: u64,
        deliver_at: Option<u64>,
    ) -> Result<(), SimError> {
        if !self.view.graph.has_edge(from, to) {
            return Err(AdversaryError::TopologyBreach { from, to }.into());
        }
        let pool = self.pools.get_mut(&from).expect("pool per faulty node");
        check_replay(&self.mint, pool, from, self.faulty, &object).map_err(AdversaryError::from)?;
        pool.record(&object);
        self.queue.deliver(from, to, object, now, deliver_at);
        Ok(())
    }

    fn adversary_sends(&mut self, from: NodeId, sends: Vec<AsyncSend>, now: u64) -> Result<(), SimError> {
        for s in sends {
            match s.send_at {
                Some(at) if at > now => self.queue.send_later(from, s.to, s.object, at, s.deliver_at),
                _ => self.adversary_send(from, s.to, s.object, now, s.deliver_at)?,
            }
        }
        Ok(())
    }
}

/// Runs the asynchronous protocol until every non-faulty node has output
/// or no events remain.
pub fn run_async(
    g: &DiGraph,
    f: usize,
    epsilon: f64,
    inputs: &BTreeMap<NodeId, f64>,
    faulty: NodeSet,
    adversary: &mut dyn AsyncAdversary,
    options: &AsyncOptions,
) -> Result<AsyncExecution, SimError> {
    validate(g, f, inputs, faulty)?;
    let r_max = rounds_for(epsilon)?;
    if !options.allow_violating {
        let verdict = check_condition_a(g, f, WorkBudget(u64::MAX))?;
        if !verdict.holds {
            return Err(SimError::ConditionViolated { condition: Condition::A, f, witness: verdict.witness });
        }
    }
    let view = AsyncView::new(g, f, r_max, options.allow_violating)?;
    let horizon = options
        .schedule
        .horizon
        .unwrap_or(DEFAULT_HORIZON_PER_ROUND.saturating_mul(r_max.max(1) as u64));
    let mut k = Kernel {
        view: &view,
        faulty,
        mint: Mint::new(options.mint_seed),
        queue: EventQueue::new(options.schedule.clone(), horizon),
        pools: faulty.iter().map(|v| (v, ObservationPool::default())).collect(),
        record: options.record_messages,
        deliveries: Vec::new(),
    };
    let honest = g.nodes().difference(faulty);
    let mut nodes: BTreeMap<NodeId, AsyncNode> = honest.iter().map(|v| (v, AsyncNode::new(v, inputs[&v]))).collect();
    let mut rounds: BTreeMap<NodeId, Vec<RoundRecord>> = honest.iter().map(|v| (v, Vec::new())).collect();
    let mut output_times = BTreeMap::new();
    adversary.setup(&view, faulty, inputs);

    let internal = |e: AuthError| SimError::InternalInvariantBroken(format!("{e}"));
    for (&v, node) in nodes.iter_mut() {
        let fx = node.start(&view, &mut k.mint.honest_signer(v)).map_err(internal)?;
        for (to, obj) in fx.sends {
            k.queue.deliver(v, to, obj, 0, None);
        }
        if node.output().is_some() {
            output_times.insert(v, 0);
        }
    }
    for u in faulty {
        let sends = {
            let mut ctx = AsyncAdversaryCtx { view: &view, now: 0, faulty, node: u, pool: &k.pools[&u], mint: &mut k.mint };
            adversary.start(&mut ctx).map_err(AdversaryError::from)?
        };
        k.adversary_sends(u, sends, 0)?;
    }

    let mut messages = 0;
    let mut now = 0;
    while output_times.len() < nodes.len() {
        let Some((key, event)) = k.queue.pop() else { break };
        now = key.time;
        match event {
            Event::Send { object, deliver_at } => k.adversary_send(key.from, key.to, object, now, deliver_at)?,
            Event::Deliver { object, sent_at } => {
                messages += 1;
                if k.record {
                    k.deliveries.push(AsyncDelivery { sent_at, index: key.index, time: now, from: key.from, to: key.to, object: object.clone() });
                }
                let to = key.to;
                if let Some(node) = nodes.get_mut(&to) {
                    let fx = node.deliver(&view, &object, now, &mut k.mint.honest_signer(to)).map_err(internal)?;
                    if let Some((round, UpdateError::EmptyAfterTrim)) = fx.failure {
                        return Err(SimError::EmptyAfterTrim { node: to, round });
                    }
                    rounds.get_mut(&to).expect("record per node").extend(fx.completed);
                    for (next, obj) in fx.sends {
                        k.queue.deliver(to, next, obj, now, None);
                    }
                    if node.output().is_some() {
                        output_times.entry(to).or_insert(now);
                    }
                } else {
                    let pool = k.pools.get_mut(&to).expect("pool per faulty node");
                    pool.record(&object);
                    let sends = {
                        let mut ctx =
                            AsyncAdversaryCtx { view: &view, now, faulty, node: to, pool, mint: &mut k.mint };
                        adversary.on_deliver(&mut ctx, key.from, &object).map_err(AdversaryError::from)?
                    };
                    k.adversary_sends(to, sends, now)?;
                }
            }
        }
    }

    let blocked: NodeSet = honest.iter().filter(|v| !output_times.contains_key(v)).collect();
    if !blocked.is_empty() && !options.allow_violating {
        return Err(SimError::SchedulerStall { blocked });
    }
    Ok(AsyncExecution {
        n: g.node_count(),
        f,
        epsilon,
        r_max,
        faulty,
        adversary: adversary.name(),
        inputs: inputs.clone(),
        outputs: nodes.iter().filter_map(|(&v, node)| node.output().map(|y| (v, y))).collect(),
        output_times,
        blocked,
        rounds,
        messages,
        events: k.queue.processed,
        end_time: now,
        deliveries: k.deliveries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Silent;

    impl AsyncAdversary for Silent {
        fn name(&self) -> String {
            "crash-at-start".into()
        }

        fn start(&mut self, _: &mut AsyncAdversaryCtx<'_, '_>) -> Result<Vec<AsyncSend>, AuthError> {
            Ok(Vec::new())
        }

        fn on_deliver(
            &mut self,
            _: &mut AsyncAdversaryCtx<'_, '_>,
            _: NodeId,
            _: &SignedObject,
        ) -> Result<Vec<AsyncSend>, AuthError> {
            Ok(Vec::new())
        }
    }

    fn inputs(xs: &[f64]) -> BTreeMap<NodeId, f64> {
        xs.iter().enumerate().map(|(i, &x)| (i + 1, x)).collect()
    }

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn round_counts() {
        assert_eq!(rounds_for(1.0).unwrap(), 0);
        assert_eq!(rounds_for(2.0).unwrap(), 0);
        assert_eq!(rounds_for(0.5).unwrap(), 1);
        assert_eq!(rounds_for(0.3).unwrap(), 2);
        assert_eq!(rounds_for(0.25).unwrap(), 2);
        assert_eq!(rounds_for(1.0 / 1024.0).unwrap(), 10);
        assert!(rounds_for(0.0).is_err());
        assert!(rounds_for(f64::NAN).is_err());
    }

    #[test]
    fn k4_crash_converges() {
        let g = DiGraph::complete(4).unwrap();
        for seed in 0..5 {
            let opts = AsyncOptions { schedule: Schedule::random(seed, 6), ..AsyncOptions::default() };
            let ex = run_async(&g, 1, 0.01, &inputs(&[0.0, 1.0, 0.25, 0.9]), set(&[4]), &mut Silent, &opts).unwrap();
            assert_eq!(ex.outputs.len(), 3);
            assert!(ex.blocked.is_empty());
            let lo = ex.outputs.values().copied().fold(f64::INFINITY, f64::min);
            let hi = ex.outputs.values().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(hi - lo <= 0.01, "seed {seed}: spread {}", hi - lo);
            assert!(lo >= 0.0 && hi <= 1.0);
            assert!(ex.rounds.values().all(|r| r.len() == ex.r_max));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let g = DiGraph::complete(4).unwrap();
        let opts = AsyncOptions { schedule: Schedule::random(3, 5), ..AsyncOptions::default() };
        let x = inputs(&[0.1, 0.7, 0.4, 0.0]);
        let a = run_async(&g, 1, 0.1, &x, set(&[2]), &mut Silent, &opts).unwrap();
        let b = run_async(&g, 1, 0.1, &x, set(&[2]), &mut Silent, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_rounds_outputs_input() {
        let g = DiGraph::complete(4).unwrap();
        let x = inputs(&[0.1, 0.7, 0.4, 0.0]);
        let ex = run_async(&g, 1, 1.0, &x, NodeSet::empty(), &mut Silent, &AsyncOptions::default()).unwrap();
        assert_eq!(ex.r_max, 0);
        assert_eq!(ex.outputs, x);
    }

    #[test]
    fn gate_rejects_k3() {
        let g = DiGraph::complete(3).unwrap();
        let err = run_async(&g, 1, 0.5, &inputs(&[0.0, 1.0, 0.5]), NodeSet::empty(), &mut Silent, &AsyncOptions::default())
            .unwrap_err();
        assert!(matches!(err, SimError::ConditionViolated { condition: Condition::A, .. }));
    }

    #[test]
    fn inputs_outside_unit_interval_rejected() {
        let g = DiGraph::complete(4).unwrap();
        let err = run_async(&g, 1, 0.5, &inputs(&[0.0, 1.5, 0.5, 0.1]), NodeSet::empty(), &mut Silent, &AsyncOptions::default())
            .unwrap_err();
        assert!(matches!(err, SimError::InvalidScenario(_)));
    }

    #[test]
    fn late_reports_keep_peers_live() {
        // node 2 closes round 3 treating node 4 as faulty; node 1 saw node 3
        // equivocate and can only finish once node 2's round-3 report grows
        use crate::adversary::{AsyncStrategy, Strategy};
        let g = DiGraph::complete(4).unwrap();
        let inputs = inputs(&[0.14821637045954283, 0.2576482781504046, 0.3897325271952521, 0.3704675723053422]);
        let options = AsyncOptions { mint_seed: 377, schedule: Schedule::random(11, 8), ..AsyncOptions::default() };
        let mut adv = AsyncStrategy::new(Strategy::EquivocateBinary);
        let ex = run_async(&g, 1, 1.0 / 64.0, &inputs, NodeSet::singleton(3), &mut adv, &options).unwrap();
        assert!(ex.blocked.is_empty());
        assert_eq!(ex.outputs.len(), 3);
    }
}
