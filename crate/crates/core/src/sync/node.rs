use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::Serialize;

use super::{update_state, IterationView, UpdateOutcome};
use crate::auth::{AuthError, Payload, SignedObject, Signer, Tag};
use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "object", rename_all = "snake_case")]
pub enum SyncMessage {
    /// Round 0: `(u, s)^u` from `I_F` to `S_F`.
    Value(SignedObject),
    /// Rounds 1 and later: `(u, s, X)^u` with `u` in `S_F`.
    Flood(SignedObject),
}

impl SyncMessage {
    pub fn object(&self) -> &SignedObject {
        match self {
            SyncMessage::Value(o) | SyncMessage::Flood(o) => o,
        }
    }
}

/// `(u, s)` if `obj` is a correctly signed round-0 value of `iteration`.
pub fn check_value(obj: &SignedObject, iteration: usize, keys: &dyn Signer) -> Option<(NodeId, u8)> {
    match *obj.payload() {
        Payload::Binary { iteration: it, node, bit }
            if it == iteration && node == obj.signer() && bit <= 1 && keys.verify(obj) =>
        {
            Some((node, bit))
        }
        _ => None,
    }
}

/// The tuples carried by a correct flood message: `(u, s)` followed by the
/// values in `X`. `None` if any check fails.
pub fn check_flood(
    obj: &SignedObject,
    view: &IterationView<'_>,
    keys: &dyn Signer,
) -> Option<Vec<(NodeId, u8)>> {
    let source = view.entry.source?;
    let Payload::Flood { iteration, node, bit, ref inner } = *obj.payload() else {
        return None;
    };
    if iteration != view.entry.index || node != obj.signer() || bit > 1 || !source.contains(node) {
        return None;
    }
    if !keys.verify(obj) {
        return None;
    }
    let allowed = view.graph.in_neighbors(node).intersection(view.entry.incoming);
    let mut out = Vec::with_capacity(inner.len() + 1);
    out.push((node, bit));
    for x in inner {
        let (w, b) = check_value(x, iteration, keys)?;
        if !allowed.contains(w) {
            return None;
        }
        out.push((w, b));
    }
    Some(out)
}

/// One node running the flooding and update steps.
#[derive(Debug, Clone)]
pub struct SyncNode {
    id: NodeId,
    s: u8,
    x: BTreeSet<SignedObject>,
    y: BTreeSet<(NodeId, u8)>,
    forwarded: BTreeSet<Tag>,
}

impl SyncNode {
    pub fn new(id: NodeId, input: u8) -> Self {
        Self { id, s: input, x: BTreeSet::new(), y: BTreeSet::new(), forwarded: BTreeSet::new() }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn value(&self) -> u8 {
        self.s
    }

    pub fn y(&self) -> &BTreeSet<(NodeId, u8)> {
        &self.y
    }

    pub fn begin_iteration(&mut self) {
        self.x.clear();
        self.y.clear();
        self.forwarded.clear();
    }

    /// Lock-step round `round` of flooding. `inbox` holds what was sent to
    /// this node in the previous round, tagged with the direct sender.
    pub fn step(
        &mut self,
        view: &IterationView<'_>,
        round: usize,
        inbox: &[(NodeId, SyncMessage)],
        keys: &mut dyn Signer,
    ) -> Result<Vec<(NodeId, SyncMessage)>, AuthError> {
        let entry = view.entry;
        let Some(source) = entry.source else {
            return Ok(Vec::new());
        };
        let g = view.graph;
        let mut out = Vec::new();
        match round {
            0 => {
                if entry.incoming.contains(self.id) {
                    let obj = keys.sign(Payload::Binary {
                        iteration: entry.index,
                        node: self.id,
                        bit: self.s,
                    })?;
                    for to in g.out_neighbors(self.id).intersection(source) {
                        out.push((to, SyncMessage::Value(obj.clone())));
                    }
                }
            }
            1 => {
                // only S_F listens to round-0 values
                if source.contains(self.id) {
                    for (from, msg) in inbox {
                        let SyncMessage::Value(obj) = msg else { continue };
                        if *from != obj.signer() || !entry.incoming.contains(*from) {
                            continue;
                        }
                        if let Some(t) = check_value(obj, entry.index, &*keys) {
                            self.x.insert(obj.clone());
                            self.y.insert(t);
                        }
                    }
                    self.y.insert((self.id, self.s));
                    let obj = keys.sign(Payload::flood(
                        entry.index,
                        self.id,
                        self.s,
                        self.x.iter().cloned(),
                    ))?;
                    self.forwarded.insert(obj.tag());
                    for to in g.out_neighbors(self.id) {
                        out.push((to, SyncMessage::Flood(obj.clone())));
                    }
                }
            }
            _ => {
                let forwarding = !entry.f_set.contains(self.id);
                for (from, msg) in inbox {
                    let SyncMessage::Flood(obj) = msg else { continue };
                    if entry.f_set.contains(*from) {
                        continue;
                    }
                    let Some(tuples) = check_flood(obj, view, &*keys) else { continue };
                    self.y.extend(tuples);
                    if forwarding && self.forwarded.insert(obj.tag()) {
                        for to in g.out_neighbors(self.id) {
                            out.push((to, SyncMessage::Flood(obj.clone())));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Step 2(ii). Returns the outcome and applies the new value.
    pub fn update(&mut self, view: &IterationView<'_>) -> Result<UpdateOutcome, alloc::string::String> {
        let Some(source) = view.entry.source else {
            return Ok(UpdateOutcome {
                value: self.s,
                rule: super::UpdateRule::Infeasible { reason: "no unique source component".into() },
                used: Vec::new(),
            });
        };
        let out = update_state(view.graph, view.f, view.entry.f_set, source, self.s, &self.y)?;
        self.s = out.value;
        Ok(out)
    }
}
