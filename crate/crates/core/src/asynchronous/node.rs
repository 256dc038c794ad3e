use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::Serialize;

use super::AsyncView;
use crate::auth::{AuthError, Payload, Real, SignedObject, Signer, Tag};
use crate::graph::{NodeId, NodeSet};

/// Round and value set of a correct message `(u, X)^u`; `None` if any
/// part is unsigned, tampered, from another round or not a finite real.
pub fn check_report<'a>(obj: &'a SignedObject, keys: &dyn Signer) -> Option<(usize, &'a [SignedObject])> {
    let Payload::Report { round, node, ref inner } = *obj.payload() else {
        return None;
    };
    if node != obj.signer() || round == 0 || !keys.verify(obj) {
        return None;
    }
    for x in inner {
        match *x.payload() {
            Payload::Value { round: r, node: w, value: Real(s) }
                if r == round && w == x.signer() && s.is_finite() && keys.verify(x) => {}
            _ => return None,
        }
    }
    Some((round, inner))
}

fn value_of(obj: &SignedObject) -> f64 {
    match *obj.payload() {
        Payload::Value { value: Real(s), .. } => s,
        _ => f64::NAN,
    }
}

/// What a node recorded when it completed a round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Logical time of completion.
    pub time: u64,
    /// Value the node held (and sent) during the round.
    pub start: f64,
    /// Fault set whose completeness check passed, and its source component.
    pub f_v: NodeSet,
    pub source: NodeSet,
    /// The frozen `X_{v,v}` as `(node, value)` pairs.
    pub frozen: Vec<(NodeId, f64)>,
    pub phi: usize,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateError {
    EmptyAfterTrim,
}

/// Steps I to III of the update: returns `(phi, m, M, new value)`.
pub fn trimmed_midpoint(frozen: &[(NodeId, f64)], f: usize) -> Result<(usize, f64, f64, f64), UpdateError> {
    let mut by_node: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
    for &(w, s) in frozen {
        by_node.entry(w).or_default().push(s);
    }
    let mut phi = 0;
    let mut kept: Vec<(f64, NodeId)> = Vec::new();
    for (w, vals) in by_node {
        let first = vals[0];
        if vals.iter().any(|s| s.total_cmp(&first).is_ne()) {
            phi += 1;
        } else {
            kept.push((first, w));
        }
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let trim = f.saturating_sub(phi);
    if kept.len() <= 2 * trim {
        return Err(UpdateError::EmptyAfterTrim);
    }
    let rest = &kept[trim..kept.len() - trim];
    let m = rest[0].0;
    let big_m = rest[rest.len() - 1].0;
    Ok((phi, m, big_m, (big_m + m) / 2.0))
}

/// Outcome of handing a message to a node.
#[derive(Debug, Default)]
pub struct Effects {
    pub sends: Vec<(NodeId, SignedObject)>,
    pub completed: Vec<RoundRecord>,
    pub failure: Option<(usize, UpdateError)>,
}

/// One node running the asynchronous protocol.
#[derive(Debug, Clone)]
pub struct AsyncNode {
    id: NodeId,
    s: f64,
    round: usize,
    sets: BTreeMap<NodeId, BTreeSet<SignedObject>>,
    /// `X_{v,v}` of every completed round, still growing.
    past: BTreeMap<usize, BTreeSet<SignedObject>>,
    relayed: BTreeSet<Tag>,
    buffer: Vec<SignedObject>,
    output: Option<f64>,
    /// Set when an update fails; the node stops advancing.
    stuck: bool,
}

impl AsyncNode {
    pub fn new(id: NodeId, input: f64) -> Self {
        Self {
            id,
            s: input,
            round: 0,
            sets: BTreeMap::new(),
            past: BTreeMap::new(),
            relayed: BTreeSet::new(),
            buffer: Vec::new(),
            output: None,
            stuck: false,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn value(&self) -> f64 {
        self.s
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn output(&self) -> Option<f64> {
        self.output
    }

    pub fn set_of(&self, u: NodeId) -> Option<&BTreeSet<SignedObject>> {
        self.sets.get(&u)
    }

    fn broadcast(&self, view: &AsyncView<'_>, obj: &SignedObject, fx: &mut Effects) {
        for to in view.graph.out_neighbors(self.id) {
            fx.sends.push((to, obj.clone()));
        }
    }

    /// Starts round 1, or outputs at once when no rounds are needed.
    pub fn start(&mut self, view: &AsyncView<'_>, keys: &mut dyn Signer) -> Result<Effects, AuthError> {
        let mut fx = Effects::default();
        if view.r_max == 0 {
            self.output = Some(self.s);
            return Ok(fx);
        }
        self.round = 1;
        self.begin_round(view, keys, &mut fx)?;
        Ok(fx)
    }

    fn begin_round(&mut self, view: &AsyncView<'_>, keys: &mut dyn Signer, fx: &mut Effects) -> Result<(), AuthError> {
        self.sets.clear();
        let own = keys.sign(Payload::Value { round: self.round, node: self.id, value: Real(self.s) })?;
        self.sets.insert(self.id, [own].into_iter().collect());
        self.send_own(view, keys, fx)
    }

    fn send_own(&mut self, view: &AsyncView<'_>, keys: &mut dyn Signer, fx: &mut Effects) -> Result<(), AuthError> {
        let own = &self.sets[&self.id];
        self.send_report(view, self.round, own.clone(), keys, fx)
    }

    fn send_report(
        &mut self,
        view: &AsyncView<'_>,
        round: usize,
        own: BTreeSet<SignedObject>,
        keys: &mut dyn Signer,
        fx: &mut Effects,
    ) -> Result<(), AuthError> {
        let msg = keys.sign(Payload::report(round, self.id, own))?;
        self.relayed.insert(msg.tag());
        self.broadcast(view, &msg, fx);
        Ok(())
    }

    /// Steps (b) and (c) for a round already completed: peers whose check
    /// waits on our report of that round still need it to grow.
    fn fold_past(
        &mut self,
        view: &AsyncView<'_>,
        round: usize,
        inner: &[SignedObject],
        keys: &mut dyn Signer,
        fx: &mut Effects,
    ) -> Result<(), AuthError> {
        let Some(own) = self.past.get_mut(&round) else {
            return Ok(());
        };
        let before = own.len();
        own.extend(inner.iter().cloned());
        if own.len() != before {
            let own = own.clone();
            self.send_report(view, round, own, keys, fx)?;
        }
        Ok(())
    }

    /// Handles a message from an incoming neighbour at logical time `now`.
    pub fn deliver(
        &mut self,
        view: &AsyncView<'_>,
        obj: &SignedObject,
        now: u64,
        keys: &mut dyn Signer,
    ) -> Result<Effects, AuthError> {
        let mut fx = Effects::default();
        let Some((round, inner)) = check_report(obj, &*keys) else {
            return Ok(fx);
        };
        // relay every correct message once, whatever our own round
        if self.relayed.insert(obj.tag()) {
            self.broadcast(view, obj, &mut fx);
        }
        if self.stuck || round > view.r_max {
            return Ok(fx);
        }
        if self.output.is_some() || round < self.round {
            self.fold_past(view, round, inner, keys, &mut fx)?;
            return Ok(fx);
        }
        if round > self.round {
            self.buffer.push(obj.clone());
            return Ok(fx);
        }
        let mut pending = alloc::vec![obj.clone()];
        while let Some(next) = pending.pop() {
            if report_round(&next) != self.round {
                continue;
            }
            if self.apply(view, &next, now, keys, &mut fx)? {
                if self.output.is_some() || self.stuck {
                    break;
                }
                // replay buffered messages of the new round, oldest first
                let (ready, later): (Vec<_>, Vec<_>) =
                    self.buffer.drain(..).partition(|o| report_round(o) == self.round);
                self.buffer = later.into_iter().filter(|o| report_round(o) > self.round).collect();
                pending.extend(ready.into_iter().rev());
            }
        }
        Ok(fx)
    }

    /// Steps (a) to (d) for a correct message of the current round.
    /// Returns true if the round completed.
    fn apply(
        &mut self,
        view: &AsyncView<'_>,
        obj: &SignedObject,
        now: u64,
        keys: &mut dyn Signer,
        fx: &mut Effects,
    ) -> Result<bool, AuthError> {
        let u = obj.signer();
        if u == self.id {
            return Ok(false);
        }
        let x: BTreeSet<SignedObject> = obj.payload().inner().iter().cloned().collect();
        let mut changed = false;
        let current = self.sets.entry(u).or_default();
        if current.len() < x.len() && current.is_subset(&x) {
            *current = x.clone();
            changed = true;
        }
        let own = self.sets.get_mut(&self.id).expect("own set exists during a round");
        let before = own.len();
        own.extend(x);
        if own.len() != before {
            changed = true;
            self.send_own(view, keys, fx)?;
        }
        if !changed {
            return Ok(false);
        }
        let Some((f_v, source)) = self.completeness(view) else {
            return Ok(false);
        };
        let frozen: Vec<(NodeId, f64)> =
            self.sets[&self.id].iter().map(|o| (o.signer(), value_of(o))).collect();
        let (phi, m, big_m, value) = match trimmed_midpoint(&frozen, view.f) {
            Ok(r) => r,
            Err(e) if view.degraded => {
                let _ = e;
                (0, self.s, self.s, self.s)
            }
            Err(e) => {
                fx.failure = Some((self.round, e));
                self.stuck = true;
                return Ok(true);
            }
        };
        fx.completed.push(RoundRecord {
            round: self.round,
            time: now,
            start: self.s,
            f_v,
            source,
            frozen,
            phi,
            m,
            big_m,
            value,
        });
        self.s = value;
        self.past.insert(self.round, self.sets[&self.id].clone());
        if self.round == view.r_max {
            self.output = Some(self.s);
            self.sets.clear();
            self.buffer.clear();
        } else {
            self.round += 1;
            self.begin_round(view, keys, fx)?;
        }
        Ok(true)
    }

    /// The first `F_v` (size-ascending, lexicographic) passing the check.
    pub fn completeness(&self, view: &AsyncView<'_>) -> Option<(NodeSet, NodeSet)> {
        let own = self.sets.get(&self.id)?;
        let mut by_node: BTreeMap<NodeId, usize> = BTreeMap::new();
        for o in own {
            *by_node.entry(o.signer()).or_default() += 1;
        }
        let dups: NodeSet = by_node.iter().filter(|(_, &c)| c > 1).map(|(&w, _)| w).collect();
        'candidates: for (i, cand) in view.candidates.iter().enumerate() {
            if !dups.is_subset(cand.f_set) {
                continue;
            }
            let Some(source) = view.source_for(i, self.id) else { continue };
            for w in source {
                let Some(xw) = self.sets.get(&w) else { continue 'candidates };
                if !exactly_one_each(xw, source) {
                    continue 'candidates;
                }
            }
            if exactly_one_each(own, source) {
                return Some((cand.f_set, source));
            }
        }
        None
    }
}

fn report_round(obj: &SignedObject) -> usize {
    match *obj.payload() {
        Payload::Report { round, .. } => round,
        _ => 0,
    }
}

fn exactly_one_each(set: &BTreeSet<SignedObject>, nodes: NodeSet) -> bool {
    let mut seen = NodeSet::empty();
    for o in set {
        let w = o.signer();
        if nodes.contains(w) {
            if seen.contains(w) {
                return false;
            }
            seen.insert(w);
        }
    }
    seen == nodes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_one_each_side() {
        let vals = [(1, 0.0), (2, 0.4), (3, 0.6), (4, 1.0)];
        assert_eq!(trimmed_midpoint(&vals, 1), Ok((0, 0.4, 0.6, 0.5)));
    }

    #[test]
    fn duplicate_origin_is_removed() {
        let vals = [(1, 0.0), (2, 0.4), (2, 0.9), (3, 0.6), (4, 1.0)];
        assert_eq!(trimmed_midpoint(&vals, 1), Ok((1, 0.0, 1.0, 0.5)));
    }

    #[test]
    fn equal_values_stay_put() {
        let vals = [(1, 0.3), (2, 0.3), (3, 0.3)];
        assert_eq!(trimmed_midpoint(&vals, 1), Ok((0, 0.3, 0.3, 0.3)));
    }

    #[test]
    fn ties_break_by_node_id() {
        // node 1's 0.5 ranks below node 2's 0.5, so trimming one low keeps node 2
        let vals = [(2, 0.5), (1, 0.5), (3, 0.9)];
        assert_eq!(trimmed_midpoint(&vals, 1), Ok((0, 0.5, 0.5, 0.5)));
    }

    #[test]
    fn too_few_values() {
        assert_eq!(trimmed_midpoint(&[(1, 0.0), (2, 1.0)], 1), Err(UpdateError::EmptyAfterTrim));
    }
}
