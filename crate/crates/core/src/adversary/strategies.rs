use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asynchronous::{AsyncAdversary, AsyncAdversaryCtx, AsyncNode, AsyncSend, AsyncView};
use crate::auth::{AuthError, Payload, Real, SignedObject, Signer};
use crate::graph::{DiGraph, NodeId, NodeSet};
use crate::sync::{IterationView, SyncAdversary, SyncAdversaryCtx, SyncMessage, SyncNode};

/// How one faulty node deviates in a scripted strategy. Unset fields mean
/// "as the protocol says".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaScript {
    /// Input the persona runs with instead of its own.
    pub input: Option<f64>,
    /// Never send to these nodes.
    pub mute_to: NodeSet,
    /// Ignore everything received from these nodes.
    pub deaf_from: NodeSet,
    /// Fall silent from this round on (global lock-step round when
    /// synchronous, the persona's own round when asynchronous).
    pub crash_at: Option<usize>,
}

/// A Byzantine strategy applied to every faulty node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    CrashAtStart,
    /// Follow the protocol, then fall silent from round `k` on.
    CrashAtRound { k: usize },
    /// Own signed bits are re-signed as the recipient's parity.
    EquivocateBinary,
    /// Own signed value is 0.0 to even recipients and 1.0 to odd ones.
    EquivocateReal,
    /// Follow the protocol and also re-send objects from earlier iterations
    /// or rounds.
    ReplayStale,
    /// Follow the protocol but drop each outgoing message with probability
    /// `rate`.
    OmitRandom { seed: u64, rate: f64 },
    Scripted {
        #[serde(default)]
        personas: BTreeMap<NodeId, PersonaScript>,
    },
}

/// The catalog run by campaigns and acceptance sweeps.
pub fn builtin_strategies() -> Vec<Strategy> {
    alloc::vec![
        Strategy::CrashAtStart,
        Strategy::CrashAtRound { k: 2 },
        Strategy::EquivocateBinary,
        Strategy::EquivocateReal,
        Strategy::ReplayStale,
        Strategy::OmitRandom { seed: 0, rate: 0.5 },
        Strategy::Scripted { personas: BTreeMap::new() },
    ]
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::CrashAtStart => "crash-at-start".into(),
            Strategy::CrashAtRound { k } => format!("crash-at-round-{k}"),
            Strategy::EquivocateBinary => "equivocate-binary".into(),
            Strategy::EquivocateReal => "equivocate-real".into(),
            Strategy::ReplayStale => "replay-stale".into(),
            Strategy::OmitRandom { seed, rate } => format!("omit-random({seed},{rate})"),
            Strategy::Scripted { .. } => "scripted".into(),
        }
    }

    /// Parses a catalog name. Accepts the short scenario kinds `crash`,
    /// `equivocate` and `replay`; `seed` feeds `omit-random`.
    pub fn parse(name: &str, seed: u64) -> Option<Strategy> {
        Some(match name {
            "crash" | "crash-at-start" => Strategy::CrashAtStart,
            "equivocate" | "equivocate-binary" => Strategy::EquivocateBinary,
            "equivocate-real" => Strategy::EquivocateReal,
            "replay" | "replay-stale" => Strategy::ReplayStale,
            "omit-random" | "omit" => Strategy::OmitRandom { seed, rate: 0.5 },
            "scripted" => Strategy::Scripted { personas: BTreeMap::new() },
            _ => {
                let k = name.strip_prefix("crash-at-round-")?.parse().ok()?;
                Strategy::CrashAtRound { k }
            }
        })
    }

    fn script(&self, node: NodeId) -> Option<&PersonaScript> {
        match self {
            Strategy::Scripted { personas } => personas.get(&node),
            _ => None,
        }
    }

    fn crash_round(&self, node: NodeId) -> Option<usize> {
        match self {
            Strategy::CrashAtStart => Some(0),
            Strategy::CrashAtRound { k } => Some(*k),
            _ => self.script(node).and_then(|s| s.crash_at),
        }
    }

    fn mute(&self, node: NodeId, to: NodeId) -> bool {
        self.script(node).is_some_and(|s| s.mute_to.contains(to))
    }

    fn deaf(&self, node: NodeId, from: NodeId) -> bool {
        self.script(node).is_some_and(|s| s.deaf_from.contains(from))
    }
}

/// Deterministic draw in `[0, 1)` for message `index` of `stream`.
fn unit(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Messages a replaying node adds per neighbour and round.
const STALE_PER_ROUND: usize = 2;

/// A [`Strategy`] driving faulty nodes of a synchronous execution.
pub struct SyncStrategy {
    strategy: Strategy,
    personas: BTreeMap<NodeId, SyncNode>,
    seen: BTreeMap<NodeId, Vec<SyncMessage>>,
    stale: BTreeMap<NodeId, Vec<SyncMessage>>,
    sent: BTreeMap<NodeId, u64>,
}

impl SyncStrategy {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, personas: BTreeMap::new(), seen: BTreeMap::new(), stale: BTreeMap::new(), sent: BTreeMap::new() }
    }

    fn resign(
        ctx: &mut SyncAdversaryCtx<'_>,
        msg: &SyncMessage,
        bit: u8,
    ) -> Result<SyncMessage, AuthError> {
        let obj = msg.object();
        Ok(match (msg, obj.payload()) {
            (SyncMessage::Value(_), Payload::Binary { iteration, node, .. }) => {
                SyncMessage::Value(ctx.keys().sign(Payload::Binary { iteration: *iteration, node: *node, bit })?)
            }
            (SyncMessage::Flood(_), Payload::Flood { iteration, node, inner, .. }) => SyncMessage::Flood(
                ctx.keys().sign(Payload::flood(*iteration, *node, bit, inner.iter().cloned()))?,
            ),
            _ => msg.clone(),
        })
    }
}

impl SyncAdversary for SyncStrategy {
    fn name(&self) -> String {
        self.strategy.name()
    }

    fn setup(&mut self, _g: &DiGraph, _f: usize, faulty: NodeSet, inputs: &BTreeMap<NodeId, u8>) {
        for u in faulty {
            let input = match self.strategy.script(u).and_then(|s| s.input) {
                Some(x) => u8::from(x >= 0.5),
                None => inputs[&u],
            };
            self.personas.insert(u, SyncNode::new(u, input));
        }
    }

    fn begin_iteration(&mut self, _view: &IterationView<'_>) {
        for p in self.personas.values_mut() {
            p.begin_iteration();
        }
        for (u, msgs) in core::mem::take(&mut self.seen) {
            if !msgs.is_empty() {
                self.stale.insert(u, msgs);
            }
        }
    }

    fn on_round(
        &mut self,
        ctx: &mut SyncAdversaryCtx<'_>,
        inbox: &[(NodeId, SyncMessage)],
    ) -> Result<Vec<(NodeId, SyncMessage)>, AuthError> {
        let u = ctx.node;
        if self.strategy.crash_round(u).is_some_and(|k| ctx.global_round >= k) {
            return Ok(Vec::new());
        }
        let inbox: Vec<_> = inbox.iter().filter(|(from, _)| !self.strategy.deaf(u, *from)).cloned().collect();
        self.seen.entry(u).or_default().extend(inbox.iter().map(|(_, m)| m.clone()));
        let view = ctx.view;
        let persona = self.personas.get_mut(&u).expect("persona per faulty node");
        let mut out = persona.step(&view, ctx.round, &inbox, &mut ctx.keys())?;
        match &self.strategy {
            Strategy::EquivocateBinary | Strategy::EquivocateReal => {
                for (to, msg) in out.iter_mut() {
                    if msg.object().signer() == u {
                        *msg = Self::resign(ctx, msg, (*to % 2) as u8)?;
                    }
                }
            }
            Strategy::ReplayStale => {
                if let Some(stale) = self.stale.get(&u) {
                    for to in view.graph.out_neighbors(u) {
                        for i in 0..STALE_PER_ROUND.min(stale.len()) {
                            let pick = (ctx.round * STALE_PER_ROUND + i) % stale.len();
                            out.push((to, stale[pick].clone()));
                        }
                    }
                }
            }
            Strategy::OmitRandom { seed, rate } => {
                let counter = self.sent.entry(u).or_default();
                out.retain(|_| {
                    *counter += 1;
                    unit(*seed, u as u64, *counter) >= *rate
                });
            }
            _ => {}
        }
        out.retain(|(to, _)| !self.strategy.mute(u, *to));
        Ok(out)
    }

    fn end_iteration(&mut self, view: &IterationView<'_>) {
        for p in self.personas.values_mut() {
            // a persona may hold inconsistent state; it then keeps its value
            let _ = p.update(view);
        }
    }
}

/// A [`Strategy`] driving faulty nodes of an asynchronous execution.
pub struct AsyncStrategy {
    strategy: Strategy,
    personas: BTreeMap<NodeId, AsyncNode>,
    stale: BTreeMap<NodeId, Vec<SignedObject>>,
    sent: BTreeMap<NodeId, u64>,
}

impl AsyncStrategy {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, personas: BTreeMap::new(), stale: BTreeMap::new(), sent: BTreeMap::new() }
    }

    fn crashed(&self, u: NodeId) -> bool {
        let round = self.personas.get(&u).map_or(0, AsyncNode::round);
        match self.strategy.crash_round(u) {
            Some(k) => k <= 1 || round >= k,
            None => false,
        }
    }

    /// Own report for `to` with the persona's value replaced by `value`.
    fn equivocal(
        ctx: &mut AsyncAdversaryCtx<'_, '_>,
        obj: &SignedObject,
        value: f64,
    ) -> Result<SignedObject, AuthError> {
        let u = ctx.node;
        let Payload::Report { round, inner, .. } = obj.payload() else {
            return Ok(obj.clone());
        };
        let own = ctx.keys().sign(Payload::Value { round: *round, node: u, value: Real(value) })?;
        let mut items: Vec<SignedObject> = inner.iter().filter(|o| o.signer() != u).cloned().collect();
        items.push(own);
        ctx.keys().sign(Payload::report(*round, u, items))
    }

    fn finish(
        &mut self,
        ctx: &mut AsyncAdversaryCtx<'_, '_>,
        sends: Vec<(NodeId, SignedObject)>,
        round_before: usize,
    ) -> Result<Vec<AsyncSend>, AuthError> {
        let u = ctx.node;
        if self.crashed(u) {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(sends.len());
        for (to, obj) in sends {
            if self.strategy.mute(u, to) {
                continue;
            }
            let obj = match self.strategy {
                Strategy::EquivocateBinary | Strategy::EquivocateReal if obj.signer() == u => {
                    Self::equivocal(ctx, &obj, (to % 2) as f64)?
                }
                _ => obj,
            };
            if let Strategy::OmitRandom { seed, rate } = self.strategy {
                let counter = self.sent.entry(u).or_default();
                *counter += 1;
                if unit(seed, u as u64, *counter) < rate {
                    continue;
                }
            }
            out.push(AsyncSend::now(to, obj));
        }
        let round_now = self.personas.get(&u).map_or(0, AsyncNode::round);
        if matches!(self.strategy, Strategy::ReplayStale) && round_now > round_before {
            if let Some(stale) = self.stale.get(&u) {
                let picks: Vec<_> = stale.iter().rev().take(STALE_PER_ROUND).cloned().collect();
                for to in ctx.view.graph.out_neighbors(u) {
                    for obj in &picks {
                        out.push(AsyncSend::now(to, obj.clone()));
                    }
                }
            }
        }
        Ok(out)
    }
}

impl AsyncAdversary for AsyncStrategy {
    fn name(&self) -> String {
        self.strategy.name()
    }

    fn setup(&mut self, _view: &AsyncView<'_>, faulty: NodeSet, inputs: &BTreeMap<NodeId, f64>) {
        for u in faulty {
            let input = self.strategy.script(u).and_then(|s| s.input).unwrap_or(inputs[&u]);
            self.personas.insert(u, AsyncNode::new(u, input));
        }
    }

    fn start(&mut self, ctx: &mut AsyncAdversaryCtx<'_, '_>) -> Result<Vec<AsyncSend>, AuthError> {
        let u = ctx.node;
        if self.crashed(u) {
            return Ok(Vec::new());
        }
        let view = ctx.view;
        let persona = self.personas.get_mut(&u).expect("persona per faulty node");
        let fx = persona.start(view, &mut ctx.keys())?;
        self.finish(ctx, fx.sends, 0)
    }

    fn on_deliver(
        &mut self,
        ctx: &mut AsyncAdversaryCtx<'_, '_>,
        from: NodeId,
        obj: &SignedObject,
    ) -> Result<Vec<AsyncSend>, AuthError> {
        let u = ctx.node;
        if self.crashed(u) || self.strategy.deaf(u, from) {
            return Ok(Vec::new());
        }
        let view = ctx.view;
        let persona = self.personas.get_mut(&u).expect("persona per faulty node");
        let before = persona.round();
        if matches!(self.strategy, Strategy::ReplayStale) {
            if let Payload::Report { round, .. } = obj.payload() {
                if *round < before && ctx.verify(obj) {
                    let stale = self.stale.entry(u).or_default();
                    if !stale.contains(obj) {
                        stale.push(obj.clone());
                    }
                }
            }
        }
        let now = ctx.now;
        let fx = persona.deliver(view, obj, now, &mut ctx.keys())?;
        self.finish(ctx, fx.sends, before)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in builtin_strategies() {
            let parsed = Strategy::parse(&s.name(), 0);
            match s {
                Strategy::OmitRandom { .. } => assert!(parsed.is_none()),
                _ => assert_eq!(parsed, Some(s)),
            }
        }
        assert_eq!(Strategy::parse("crash", 0), Some(Strategy::CrashAtStart));
        assert_eq!(Strategy::parse("crash-at-round-7", 0), Some(Strategy::CrashAtRound { k: 7 }));
        assert_eq!(Strategy::parse("omit-random", 3), Some(Strategy::OmitRandom { seed: 3, rate: 0.5 }));
        assert_eq!(Strategy::parse("bogus", 0), None);
    }

    #[test]
    fn omission_draws_are_deterministic() {
        let a: Vec<f64> = (0..20).map(|i| unit(9, 2, i)).collect();
        let b: Vec<f64> = (0..20).map(|i| unit(9, 2, i)).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| (0.0..1.0).contains(x)));
        assert_ne!(a, (0..20).map(|i| unit(10, 2, i)).collect::<Vec<_>>());
    }
}
