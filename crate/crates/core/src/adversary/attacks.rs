use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::strategies::{AsyncStrategy, PersonaScript, Strategy, SyncStrategy};
use crate::asynchronous::{
    run_async, AsyncAdversary, AsyncAdversaryCtx, AsyncExecution, AsyncOptions, AsyncSend, DelayModel, Schedule,
    WithholdRule,
};
use crate::audit::{audit_async, audit_sync};
use crate::auth::{AuthError, Payload, SignedObject, Signer};
use crate::graph::{source_components_within, subsets_up_to, unique_source_component, DiGraph, NodeId, NodeSet, Sources};
use crate::report::{AttackInfo, ExecutionReport, Mode};
use crate::sim::SimError;
use crate::sync::{run_sync, SyncOptions};

/// Epsilon used by the asynchronous demonstrations.
pub const DEMO_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("witness mismatch: {0}")]
    WitnessMismatch(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackOptions {
    pub mint_seed: u64,
    pub schedule_seed: u64,
    pub max_delay: u64,
}

impl Default for AttackOptions {
    fn default() -> Self {
        Self { mint_seed: 0, schedule_seed: 0, max_delay: 4 }
    }
}

const EFFECTIVE: &str = "agreement violated (necessity demonstrated)";
const INEFFECTIVE: &str = "attack ineffective against this protocol";

fn mismatch(msg: String) -> AttackError {
    AttackError::WitnessMismatch(msg)
}

fn check_fault_set(g: &DiGraph, f: usize, f_set: NodeSet) -> Result<(), AttackError> {
    if f_set.len() > f || !f_set.is_subset(g.nodes()) {
        return Err(mismatch(format!("{f_set} is not a set of at most {f} nodes of the graph")));
    }
    Ok(())
}

fn unique_source(g: &DiGraph, f_set: NodeSet) -> Result<NodeSet, AttackError> {
    match unique_source_component(g, f_set).map_err(SimError::from)? {
        Sources::Unique(s) => Ok(s),
        Sources::NotUnique(c) => Err(mismatch(format!("G - {f_set} has {} source components", c.len()))),
    }
}

fn outcome(report: &ExecutionReport) -> String {
    String::from(if report.safety_violated { EFFECTIVE } else { INEFFECTIVE })
}

fn async_options(opts: AttackOptions) -> AsyncOptions {
    AsyncOptions {
        allow_violating: true,
        mint_seed: opts.mint_seed,
        schedule: Schedule { horizon: Some(u64::MAX), ..Schedule::random(opts.schedule_seed, opts.max_delay) },
        record_messages: false,
    }
}

/// The first `F` (size-ascending) whose `G_F` has several source components.
pub fn find_two_sources(g: &DiGraph, f: usize) -> Option<(NodeSet, NodeSet, NodeSet)> {
    subsets_up_to(g.nodes(), f).find_map(|f_set| {
        let comps = source_components_within(g, g.nodes().difference(f_set));
        (comps.len() > 1).then(|| (f_set, comps[0], comps[1]))
    })
}

/// The first `F` whose unique source component has at most `f` nodes.
pub fn find_small_source(g: &DiGraph, f: usize) -> Option<NodeSet> {
    subsets_up_to(g.nodes(), f).find(|&f_set| {
        matches!(unique_source_component(g, f_set), Ok(Sources::Unique(s)) if s.len() <= f)
    })
}

/// The first pair `F, F'` with unique sources of at least `2f + 1` nodes
/// meeting in at most `f` nodes.
pub fn find_small_intersection(g: &DiGraph, f: usize) -> Option<(NodeSet, NodeSet)> {
    let big: Vec<(NodeSet, NodeSet)> = subsets_up_to(g.nodes(), f)
        .filter_map(|f_set| match unique_source_component(g, f_set) {
            Ok(Sources::Unique(s)) if s.len() > 2 * f => Some((f_set, s)),
            _ => None,
        })
        .collect();
    for (i, &(fa, sa)) in big.iter().enumerate() {
        for &(fb, sb) in &big[i + 1..] {
            if sa.intersection(sb).len() <= f {
                return Some((fa, fb));
            }
        }
    }
    None
}

/// `F` crashes, one source component starts at 0 and another at 1.
pub fn attack_two_sources(
    g: &DiGraph,
    f: usize,
    f_set: NodeSet,
    s0: NodeSet,
    s1: NodeSet,
    mode: Mode,
    opts: AttackOptions,
) -> Result<ExecutionReport, AttackError> {
    check_fault_set(g, f, f_set)?;
    let comps = source_components_within(g, g.nodes().difference(f_set));
    if s0 == s1 || !comps.contains(&s0) || !comps.contains(&s1) {
        return Err(mismatch(format!("{s0} and {s1} are not two source components of G - {f_set}")));
    }
    let inputs = |v: NodeId| u8::from(s1.contains(v));
    let mut report = match mode {
        Mode::Sync => {
            let inputs: BTreeMap<NodeId, u8> = g.nodes().iter().map(|v| (v, inputs(v))).collect();
            let options = SyncOptions { allow_violating: true, mint_seed: opts.mint_seed, record_messages: false };
            let ex = run_sync(g, f, &inputs, f_set, &mut SyncStrategy::new(Strategy::CrashAtStart), options)?;
            audit_sync(&ex, &options)
        }
        Mode::Async => {
            let inputs: BTreeMap<NodeId, f64> = g.nodes().iter().map(|v| (v, f64::from(inputs(v)))).collect();
            let options = async_options(opts);
            let mut adv = AsyncStrategy::new(Strategy::CrashAtStart);
            let ex = run_async(g, f, DEMO_EPSILON, &inputs, f_set, &mut adv, &options)?;
            audit_async(&ex, &options)
        }
    };
    report.attack = Some(AttackInfo {
        script: "two-sources".into(),
        target: "unique source component".into(),
        witness: [("F".into(), f_set), ("S0".into(), s0), ("S1".into(), s1)].into_iter().collect(),
        outcome: outcome(&report),
        reference_times: BTreeMap::new(),
    });
    Ok(report)
}

/// Execution `E^c` against the synchronous protocol: `F` is faulty with
/// input 1 and cuts itself off from `S_F`; `S_F` starts at 0, the rest at 1.
pub fn attack_small_source_sync(
    g: &DiGraph,
    f: usize,
    f_set: NodeSet,
    opts: AttackOptions,
) -> Result<ExecutionReport, AttackError> {
    check_fault_set(g, f, f_set)?;
    let source = unique_source(g, f_set)?;
    if source.len() > f {
        return Err(mismatch(format!("S_F = {source} for F = {f_set} has more than {f} nodes")));
    }
    let inputs: BTreeMap<NodeId, u8> = g.nodes().iter().map(|v| (v, u8::from(!source.contains(v)))).collect();
    let script = PersonaScript { input: Some(1.0), mute_to: source, deaf_from: source, crash_at: None };
    let personas = f_set.iter().map(|u| (u, script.clone())).collect();
    let mut adv = SyncStrategy::new(Strategy::Scripted { personas });
    let options = SyncOptions { allow_violating: true, mint_seed: opts.mint_seed, record_messages: false };
    let ex = run_sync(g, f, &inputs, f_set, &mut adv, options)?;
    let mut report = audit_sync(&ex, &options);
    report.attack = Some(AttackInfo {
        script: "small-source-sync".into(),
        target: "source component size".into(),
        witness: [("F".into(), f_set), ("S_F".into(), source)].into_iter().collect(),
        outcome: outcome(&report),
        reference_times: BTreeMap::new(),
    });
    Ok(report)
}

/// One message a faulty node re-sends: `(to, object, sent at, delivered at)`.
type Planned = (NodeId, SignedObject, u64, u64);

/// Faulty nodes re-send recorded traffic on the recorded schedule.
struct TranscriptReplay {
    plan: BTreeMap<NodeId, Vec<Planned>>,
}

fn remint(ctx: &mut AsyncAdversaryCtx<'_, '_>, obj: &SignedObject) -> Result<SignedObject, AuthError> {
    if !ctx.faulty.contains(obj.signer()) {
        return Ok(obj.clone());
    }
    let payload = match obj.payload() {
        Payload::Report { round, node, inner } => {
            let inner = inner.iter().map(|o| remint(ctx, o)).collect::<Result<Vec<_>, _>>()?;
            Payload::report(*round, *node, inner)
        }
        other => other.clone(),
    };
    ctx.keys_for(obj.signer()).sign(payload)
}

impl AsyncAdversary for TranscriptReplay {
    fn name(&self) -> String {
        "transcript-replay".into()
    }

    fn start(&mut self, ctx: &mut AsyncAdversaryCtx<'_, '_>) -> Result<Vec<AsyncSend>, AuthError> {
        let plan = self.plan.remove(&ctx.node).unwrap_or_default();
        plan.into_iter()
            .map(|(to, obj, sent_at, time)| {
                Ok(AsyncSend { to, object: remint(ctx, &obj)?, send_at: Some(sent_at), deliver_at: Some(time) })
            })
            .collect()
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

/// Reference run with `crashed` silent and every input equal to `input`.
/// Returns the run and the time the last node of `watch` output.
fn reference_run(
    g: &DiGraph,
    f: usize,
    crashed: NodeSet,
    input: f64,
    watch: NodeSet,
    opts: AttackOptions,
) -> Result<(AsyncExecution, u64), AttackError> {
    let inputs: BTreeMap<NodeId, f64> = g.nodes().iter().map(|v| (v, input)).collect();
    let options = AsyncOptions { record_messages: true, ..async_options(opts) };
    let ex = run_async(g, f, DEMO_EPSILON, &inputs, crashed, &mut AsyncStrategy::new(Strategy::CrashAtStart), &options)?;
    let mut tau = 0;
    for v in watch {
        match ex.output_times.get(&v) {
            Some(&t) => tau = tau.max(t),
            None => return Err(mismatch(format!("node {v} never decided in the reference run with {crashed} crashed"))),
        }
    }
    Ok((ex, tau))
}

/// Execution `E`: `X = S_F ∩ S_F'` is faulty and replays, toward `A` and `B`,
/// what it sent in the reference runs where `F` (inputs 0) and `F'`
/// (inputs 1) crashed, while messages from `F` to `A` and from `F'` to `B`
/// are held back until `A` and `B` have decided.
pub fn attack_small_intersection_async(
    g: &DiGraph,
    f: usize,
    f_set: NodeSet,
    f_prime: NodeSet,
    opts: AttackOptions,
) -> Result<ExecutionReport, AttackError> {
    check_fault_set(g, f, f_set)?;
    check_fault_set(g, f, f_prime)?;
    let s = unique_source(g, f_set)?;
    let s_prime = unique_source(g, f_prime)?;
    let x = s.intersection(s_prime);
    let a = s.difference(x);
    let b = s_prime.difference(x);
    if x.len() > f || a.is_empty() || b.is_empty() {
        return Err(mismatch(format!("S_F = {s} and S_F' = {s_prime} do not meet in at most {f} nodes")));
    }

    let (e0, tau0) = reference_run(g, f, f_set, 0.0, a, opts)?;
    let (e1, tau1) = reference_run(g, f, f_prime, 1.0, b, opts)?;
    let mut plan: BTreeMap<NodeId, Vec<(u64, Planned)>> = BTreeMap::new();
    for (run, targets, tau) in [(&e0, a.union(x), tau0), (&e1, b.union(x), tau1)] {
        for d in &run.deliveries {
            if x.contains(d.from) && targets.contains(d.to) && d.time <= tau {
                plan.entry(d.from).or_default().push((d.index, (d.to, d.object.clone(), d.sent_at, d.time)));
            }
        }
    }
    let plan = plan
        .into_iter()
        .map(|(u, mut items)| {
            // per edge, keep the order the messages were originally sent in
            items.sort_by_key(|(index, (to, _, sent_at, _))| (*sent_at, *to, *index));
            (u, items.into_iter().map(|(_, p)| p).collect())
        })
        .collect();

    let inputs: BTreeMap<NodeId, f64> = g.nodes().iter().map(|v| (v, if b.contains(v) { 1.0 } else { 0.0 })).collect();
    let mut options = async_options(opts);
    options.schedule.model = DelayModel::Scripted;
    options.schedule.withhold = alloc::vec![
        WithholdRule { from: f_set, to: a, until: tau0 },
        WithholdRule { from: f_prime, to: b, until: tau1 },
    ];
    let ex = run_async(g, f, DEMO_EPSILON, &inputs, x, &mut TranscriptReplay { plan }, &options)?;
    let mut report = audit_async(&ex, &options);
    report.attack = Some(AttackInfo {
        script: "small-intersection-async".into(),
        target: "source component intersection".into(),
        witness: [
            ("F".into(), f_set),
            ("F'".into(), f_prime),
            ("X".into(), x),
            ("A".into(), a),
            ("B".into(), b),
        ]
        .into_iter()
        .collect(),
        outcome: outcome(&report),
        reference_times: [("tau0".into(), tau0), ("tau1".into(), tau1)].into_iter().collect(),
    });
    Ok(report)
}
