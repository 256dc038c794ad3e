use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auth::SignedObject;
use crate::graph::{NodeId, NodeSet};

/// Events processed per round before random delays fall back to one tick.
pub const DEFAULT_HORIZON_PER_ROUND: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModel {
    /// Every message takes one tick.
    #[default]
    Fifo,
    /// `1 + h(seed, from, to, index) % max_delay` ticks.
    AdversarialRandom,
    /// Random delays plus the withholding rules.
    Scripted,
}

/// Messages from `from` to `to` are not delivered before `until + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithholdRule {
    pub from: NodeSet,
    pub to: NodeSet,
    pub until: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub model: DelayModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_delay")]
    pub max_delay: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub withhold: Vec<WithholdRule>,
    /// Event count after which delays become one tick; `None` uses
    /// [`DEFAULT_HORIZON_PER_ROUND`] per round.
    #[serde(default)]
    pub horizon: Option<u64>,
}

fn default_max_delay() -> u64 {
    8
}

impl Default for Schedule {
    fn default() -> Self {
        Self { model: DelayModel::Fifo, seed: 0, max_delay: default_max_delay(), withhold: Vec::new(), horizon: None }
    }
}

impl Schedule {
    pub fn random(seed: u64, max_delay: u64) -> Self {
        Self { model: DelayModel::AdversarialRandom, seed, max_delay, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct EventKey {
    pub time: u64,
    /// Deliveries (0) before timed adversary sends (1).
    pub kind: u8,
    pub from: NodeId,
    pub to: NodeId,
    pub index: u64,
}

#[derive(Debug, Clone)]
pub(crate) enum Event {
    Deliver { object: SignedObject, sent_at: u64 },
    Send { object: SignedObject, deliver_at: Option<u64> },
}

/// Pending events ordered by key only, so insertion order never matters.
pub(crate) struct EventQueue {
    schedule: Schedule,
    horizon: u64,
    rng: ChaCha8Rng,
    events: BTreeMap<EventKey, Event>,
    edge_deliveries: BTreeMap<(NodeId, NodeId), u64>,
    edge_sends: BTreeMap<(NodeId, NodeId), u64>,
    pub processed: u64,
}

impl EventQueue {
    pub fn new(schedule: Schedule, horizon: u64) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        Self {
            schedule,
            horizon,
            rng,
            events: BTreeMap::new(),
            edge_deliveries: BTreeMap::new(),
            edge_sends: BTreeMap::new(),
            processed: 0,
        }
    }

    pub fn pop(&mut self) -> Option<(EventKey, Event)> {
        let next = self.events.pop_first();
        if next.is_some() {
            self.processed += 1;
        }
        next
    }

    fn random_delay(&mut self, from: NodeId, to: NodeId, index: u64) -> u64 {
        // one ChaCha stream per edge, one word pair per message
        self.rng.set_stream(((from as u64) << 32) | to as u64);
        self.rng.set_word_pos(u128::from(index) * 2);
        1 + self.rng.next_u64() % self.schedule.max_delay.max(1)
    }

    /// Queues delivery of a message sent at `now`; returns its delivery time.
    pub fn deliver(
        &mut self,
        from: NodeId,
        to: NodeId,
        object: SignedObject,
        now: u64,
        pinned: Option<u64>,
    ) -> u64 {
        let counter = self.edge_deliveries.entry((from, to)).or_default();
        let index = *counter;
        *counter += 1;
        let time = match pinned {
            Some(t) => t.max(now + 1),
            None => {
                let delay = if self.processed > self.horizon || self.schedule.model == DelayModel::Fifo {
                    1
                } else {
                    self.random_delay(from, to, index)
                };
                let mut t = now + delay;
                if self.schedule.model == DelayModel::Scripted {
                    for rule in &self.schedule.withhold {
                        if rule.from.contains(from) && rule.to.contains(to) && t <= rule.until {
                            t = rule.until + 1;
                        }
                    }
                }
                t
            }
        };
        let key = EventKey { time, kind: 0, from, to, index };
        self.events.insert(key, Event::Deliver { object, sent_at: now });
        time
    }

    /// Queues an adversary send to be validated and carried out at `at`.
    pub fn send_later(&mut self, from: NodeId, to: NodeId, object: SignedObject, at: u64, deliver_at: Option<u64>) {
        let counter = self.edge_sends.entry((from, to)).or_default();
        let index = *counter;
        *counter += 1;
        let key = EventKey { time: at, kind: 1, from, to, index };
        self.events.insert(key, Event::Send { object, deliver_at });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{Mint, Payload};

    fn obj() -> SignedObject {
        Mint::new(0).sign(1, Payload::Text("m".into()))
    }

    #[test]
    fn random_delays_depend_only_on_edge_and_index() {
        let mut a = EventQueue::new(Schedule::random(7, 10), u64::MAX);
        let mut b = EventQueue::new(Schedule::random(7, 10), u64::MAX);
        let ta: Vec<u64> = (0..5).map(|_| a.deliver(1, 2, obj(), 0, None)).collect();
        // interleave another edge in b; edge (1,2) must see the same delays
        let mut tb = Vec::new();
        for _ in 0..5 {
            b.deliver(3, 2, obj(), 0, None);
            tb.push(b.deliver(1, 2, obj(), 0, None));
        }
        assert_eq!(ta, tb);
        assert!(ta.iter().all(|&t| (1..=10).contains(&t)));
    }

    #[test]
    fn withholding_and_pinning() {
        let mut s = Schedule::random(1, 3);
        s.model = DelayModel::Scripted;
        s.withhold.push(WithholdRule { from: NodeSet::singleton(1), to: NodeSet::singleton(2), until: 50 });
        let mut q = EventQueue::new(s, u64::MAX);
        assert_eq!(q.deliver(1, 2, obj(), 0, None), 51);
        assert!(q.deliver(2, 1, obj(), 0, None) <= 3);
        assert_eq!(q.deliver(1, 2, obj(), 5, Some(9)), 9);
        assert_eq!(q.deliver(1, 2, obj(), 5, Some(2)), 6);
    }

    #[test]
    fn pops_in_key_order() {
        let mut q = EventQueue::new(Schedule::default(), u64::MAX);
        q.deliver(3, 1, obj(), 0, None);
        q.deliver(1, 2, obj(), 0, None);
        q.send_later(2, 1, obj(), 1, None);
        q.deliver(1, 2, obj(), 1, None);
        let keys: Vec<_> = core::iter::from_fn(|| q.pop()).map(|(k, _)| (k.time, k.kind, k.from, k.to)).collect();
        assert_eq!(keys, [(1, 0, 1, 2), (1, 0, 3, 1), (1, 1, 2, 1), (2, 0, 1, 2)]);
    }
}
