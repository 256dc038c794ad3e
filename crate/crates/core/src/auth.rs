//! Symbolic message authentication.
//!
//! A [`Mint`] owned by the simulation kernel is the only source of valid
//! [`SignedObject`]s. Tags are keyed digests of the signer and the canonical
//! payload text, and every mint is registered, so verification is exact:
//! an object verifies iff this mint produced exactly this signer and payload.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::{self, Write as _};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{NodeId, NodeSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("adversary controlling {faulty} tried to sign as non-faulty node {signer}")]
    ForgeryAttempt { signer: NodeId, faulty: NodeSet },
    #[error("faulty node {node} emitted an object signed by {signer} it never observed")]
    ReplayViolation { node: NodeId, signer: NodeId },
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub [u8; 32]);

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // the prefix is enough to tell tags apart in test output
        for b in &self.0[..4] {
            write!(f, "{b:02x}")?;
        }
        f.write_str("..")
    }
}

/// An `f64` with a total order, so real-valued payloads can live in sets.
#[derive(Debug, Clone, Copy)]
pub struct Real(pub f64);

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Signed content. Iteration and round numbers are part of what is signed,
/// so an object cannot be replayed into a different iteration or round.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Payload {
    Text(String),
    /// `(node, bit)` in synchronous iteration `iteration`.
    Binary { iteration: usize, node: NodeId, bit: u8 },
    /// `(node, bit, X)` in synchronous iteration `iteration`.
    Flood { iteration: usize, node: NodeId, bit: u8, inner: Vec<SignedObject> },
    /// `(node, value)` in asynchronous round `round`.
    Value { round: usize, node: NodeId, value: Real },
    /// `(node, X)` in asynchronous round `round`.
    Report { round: usize, node: NodeId, inner: Vec<SignedObject> },
}

impl Payload {
    pub fn flood(iteration: usize, node: NodeId, bit: u8, inner: impl IntoIterator<Item = SignedObject>) -> Self {
        Payload::Flood { iteration, node, bit, inner: canonical(inner) }
    }

    pub fn report(round: usize, node: NodeId, inner: impl IntoIterator<Item = SignedObject>) -> Self {
        Payload::Report { round, node, inner: canonical(inner) }
    }

    /// The node named inside the payload, if any.
    pub fn subject(&self) -> Option<NodeId> {
        match *self {
            Payload::Text(_) => None,
            Payload::Binary { node, .. }
            | Payload::Flood { node, .. }
            | Payload::Value { node, .. }
            | Payload::Report { node, .. } => Some(node),
        }
    }

    pub fn inner(&self) -> &[SignedObject] {
        match self {
            Payload::Flood { inner, .. } | Payload::Report { inner, .. } => inner,
            _ => &[],
        }
    }

    /// Canonical text: the string that is signed and shown in traces.
    pub fn text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    fn write_text(&self, out: &mut String) {
        let _ = match self {
            Payload::Text(s) => out.write_str(s),
            Payload::Binary { iteration, node, bit } => write!(out, "it{iteration}:({node},{bit})"),
            Payload::Flood { iteration, node, bit, inner } => {
                let _ = write!(out, "it{iteration}:({node},{bit},");
                write_set(out, inner);
                out.write_char(')')
            }
            Payload::Value { round, node, value } => write!(out, "r{round}:({node},{:?})", value.0),
            Payload::Report { round, node, inner } => {
                let _ = write!(out, "r{round}:({node},");
                write_set(out, inner);
                out.write_char(')')
            }
        };
    }
}

fn write_set(out: &mut String, inner: &[SignedObject]) {
    out.push('{');
    for (i, obj) in inner.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        obj.payload.write_text(out);
        let _ = write!(out, "^{}", obj.signer);
    }
    out.push('}');
}

/// Sorted by (signer, payload), duplicates removed.
fn canonical(inner: impl IntoIterator<Item = SignedObject>) -> Vec<SignedObject> {
    let set: BTreeSet<SignedObject> = inner.into_iter().collect();
    set.into_iter().collect()
}

/// `payload^signer` together with its tag.
#[derive(Clone)]
pub struct SignedObject {
    signer: NodeId,
    payload: Arc<Payload>,
    tag: Tag,
}

impl SignedObject {
    /// Assembles an object without minting it. It verifies only if the
    /// parts match a minted object exactly; used to model tampering.
    pub fn from_parts(signer: NodeId, payload: Payload, tag: Tag) -> Self {
        Self { signer, payload: Arc::new(payload), tag }
    }

    pub fn signer(&self) -> NodeId {
        self.signer
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    /// This object and every object nested in it, outermost first.
    pub fn walk(&self, visit: &mut impl FnMut(&SignedObject)) {
        visit(self);
        for inner in self.payload.inner() {
            inner.walk(visit);
        }
    }
}

impl PartialEq for SignedObject {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SignedObject {}

impl PartialOrd for SignedObject {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SignedObject {
    fn cmp(&self, other: &Self) -> Ordering {
        self.signer
            .cmp(&other.signer)
            .then_with(|| {
                if Arc::ptr_eq(&self.payload, &other.payload) {
                    Ordering::Equal
                } else {
                    self.payload.cmp(&other.payload)
                }
            })
            .then_with(|| self.tag.cmp(&other.tag))
    }
}

impl fmt::Debug for SignedObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.payload.text(), self.signer)
    }
}

impl Serialize for SignedObject {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SignedObject", 3)?;
        s.serialize_field("signer", &self.signer)?;
        s.serialize_field("payload", &self.payload.text())?;
        s.serialize_field("tag", &alloc::format!("{}", self.tag))?;
        s.end()
    }
}

/// The kernel's signing authority for one trial.
#[derive(Debug, Clone)]
pub struct Mint {
    key: [u8; 32],
    registry: BTreeMap<Tag, (NodeId, Arc<Payload>)>,
    honest_mints: u64,
    faulty_mints: u64,
}

impl Mint {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"byzlab mint key");
        h.update(seed.to_le_bytes());
        Self { key: h.finalize().into(), registry: BTreeMap::new(), honest_mints: 0, faulty_mints: 0 }
    }

    fn tag_for(&self, signer: NodeId, payload: &Payload) -> Tag {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((signer as u64).to_le_bytes());
        h.update(payload.text().as_bytes());
        Tag(h.finalize().into())
    }

    fn mint(&mut self, signer: NodeId, payload: Payload) -> SignedObject {
        let tag = self.tag_for(signer, &payload);
        if let Some((s, p)) = self.registry.get(&tag) {
            if *s == signer && **p == payload {
                return SignedObject { signer, payload: Arc::clone(p), tag };
            }
        }
        let payload = Arc::new(payload);
        self.registry.insert(tag, (signer, Arc::clone(&payload)));
        SignedObject { signer, payload, tag }
    }

    /// Signs on behalf of a node running the protocol.
    pub fn sign(&mut self, signer: NodeId, payload: Payload) -> SignedObject {
        self.honest_mints += 1;
        self.mint(signer, payload)
    }

    /// Signs on behalf of the adversary, which holds only the keys of the
    /// nodes in `faulty`.
    pub fn sign_as(
        &mut self,
        faulty: NodeSet,
        signer: NodeId,
        payload: Payload,
    ) -> Result<SignedObject, AuthError> {
        if !faulty.contains(signer) {
            return Err(AuthError::ForgeryAttempt { signer, faulty });
        }
        self.faulty_mints += 1;
        Ok(self.mint(signer, payload))
    }

    /// True iff this mint produced exactly this signer, payload and tag.
    pub fn verify(&self, obj: &SignedObject) -> bool {
        match self.registry.get(&obj.tag) {
            Some((signer, payload)) => {
                *signer == obj.signer
                    && (Arc::ptr_eq(payload, &obj.payload) || **payload == *obj.payload)
            }
            None => false,
        }
    }

    /// `verify` applied to the object and everything nested in it.
    pub fn verify_deep(&self, obj: &SignedObject) -> bool {
        let mut ok = true;
        obj.walk(&mut |o| ok &= self.verify(o));
        ok
    }

    /// Mint counts on behalf of (non-faulty protocol logic, adversary).
    pub fn mint_counts(&self) -> (u64, u64) {
        (self.honest_mints, self.faulty_mints)
    }
}

/// Signing and verification on behalf of one node.
pub trait Signer {
    fn node(&self) -> NodeId;
    fn sign(&mut self, payload: Payload) -> Result<SignedObject, AuthError>;
    fn verify(&self, obj: &SignedObject) -> bool;
}

/// A [`Signer`] borrowed from a [`Mint`].
pub struct NodeSigner<'m> {
    mint: &'m mut Mint,
    node: NodeId,
    faulty: Option<NodeSet>,
}

impl Mint {
    /// Signer for a node running the protocol.
    pub fn honest_signer(&mut self, node: NodeId) -> NodeSigner<'_> {
        NodeSigner { mint: self, node, faulty: None }
    }

    /// Signer for the adversary acting as `node`; refuses unless `node` is
    /// in `faulty`.
    pub fn faulty_signer(&mut self, faulty: NodeSet, node: NodeId) -> NodeSigner<'_> {
        NodeSigner { mint: self, node, faulty: Some(faulty) }
    }
}

impl Signer for NodeSigner<'_> {
    fn node(&self) -> NodeId {
        self.node
    }

    fn sign(&mut self, payload: Payload) -> Result<SignedObject, AuthError> {
        match self.faulty {
            None => Ok(self.mint.sign(self.node, payload)),
            Some(faulty) => self.mint.sign_as(faulty, self.node, payload),
        }
    }

    fn verify(&self, obj: &SignedObject) -> bool {
        self.mint.verify(obj)
    }
}

/// Everything one node has received or created, nested objects included.
#[derive(Debug, Clone, Default)]
pub struct ObservationPool {
    seen: BTreeSet<Tag>,
}

impl ObservationPool {
    pub fn record(&mut self, obj: &SignedObject) {
        obj.walk(&mut |o| {
            self.seen.insert(o.tag);
        });
    }

    pub fn contains(&self, obj: &SignedObject) -> bool {
        self.seen.contains(&obj.tag)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Replay closure for an object emitted by faulty node `node`: every valid
/// object in it is either signed by a faulty identity or was observed by
/// `node`. Objects that do not verify are let through; recipients drop them.
pub fn check_replay(
    mint: &Mint,
    pool: &ObservationPool,
    node: NodeId,
    faulty: NodeSet,
    obj: &SignedObject,
) -> Result<(), AuthError> {
    if !mint.verify(obj) {
        return Ok(());
    }
    if faulty.contains(obj.signer) {
        for inner in obj.payload.inner() {
            check_replay(mint, pool, node, faulty, inner)?;
        }
        Ok(())
    } else if pool.contains(obj) {
        Ok(())
    } else {
        Err(AuthError::ReplayViolation { node, signer: obj.signer })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn text(s: &str) -> Payload {
        Payload::Text(s.to_string())
    }

    #[test]
    fn sign_then_verify() {
        let mut m = Mint::new(1);
        let o = m.sign(3, text("(3,0)"));
        assert!(m.verify(&o));
        assert_eq!(o.signer(), 3);
    }

    #[test]
    fn signing_is_deterministic() {
        let mut m = Mint::new(1);
        let a = m.sign(3, text("(3,0)"));
        let b = m.sign(3, text("(3,0)"));
        assert_eq!(a, b);
        assert_eq!(a.tag(), b.tag());
        assert_eq!(Mint::new(1).sign(3, text("(3,0)")).tag(), a.tag());
    }

    #[test]
    fn forgery_is_refused() {
        let mut m = Mint::new(1);
        let faulty: NodeSet = [4].into_iter().collect();
        assert_eq!(
            m.sign_as(faulty, 2, text("(2,1)")),
            Err(AuthError::ForgeryAttempt { signer: 2, faulty })
        );
        assert!(m.sign_as(faulty, 4, text("(4,1)")).is_ok());
    }

    #[test]
    fn tampering_is_detected() {
        let mut m = Mint::new(1);
        let o = m.sign(3, text("(3,0)"));
        let payload_changed = SignedObject::from_parts(3, text("(3,1)"), o.tag());
        let signer_changed = SignedObject::from_parts(2, text("(3,0)"), o.tag());
        assert!(!m.verify(&payload_changed));
        assert!(!m.verify(&signer_changed));
        // a key from another trial does not help
        let other = Mint::new(2).sign(3, text("(3,1)"));
        assert!(!m.verify(&other));
    }

    #[test]
    fn nested_sets_are_canonical() {
        let mut m = Mint::new(1);
        let a = m.sign(1, Payload::Binary { iteration: 0, node: 1, bit: 0 });
        let b = m.sign(2, Payload::Binary { iteration: 0, node: 2, bit: 1 });
        let p1 = Payload::flood(0, 5, 1, [b.clone(), a.clone()]);
        let p2 = Payload::flood(0, 5, 1, [a.clone(), b.clone(), a.clone()]);
        assert_eq!(p1, p2);
        assert_eq!(p1.text(), "it0:(5,1,{it0:(1,0)^1,it0:(2,1)^2})");
        assert_eq!(m.sign(5, p1).tag(), m.sign(5, p2).tag());
    }

    #[test]
    fn tampered_inner_object_breaks_outer() {
        let mut m = Mint::new(1);
        let a = m.sign(1, Payload::Value { round: 1, node: 1, value: Real(0.5) });
        let outer = m.sign(2, Payload::report(1, 2, [a.clone()]));
        let fake_inner = SignedObject::from_parts(1, a.payload().clone(), Tag([0; 32]));
        let fake = SignedObject::from_parts(2, Payload::report(1, 2, [fake_inner]), outer.tag());
        assert!(m.verify_deep(&outer));
        assert!(!m.verify(&fake));
    }

    #[test]
    fn replay_closure() {
        let mut m = Mint::new(1);
        let faulty: NodeSet = [4].into_iter().collect();
        let honest = m.sign(2, Payload::Binary { iteration: 0, node: 2, bit: 1 });
        let mut pool = ObservationPool::default();
        assert_eq!(
            check_replay(&m, &pool, 4, faulty, &honest),
            Err(AuthError::ReplayViolation { node: 4, signer: 2 })
        );
        let wrapped = m.sign_as(faulty, 4, Payload::flood(0, 4, 0, [honest.clone()])).unwrap();
        assert!(check_replay(&m, &pool, 4, faulty, &wrapped).is_err());
        pool.record(&honest);
        assert!(check_replay(&m, &pool, 4, faulty, &honest).is_ok());
        assert!(check_replay(&m, &pool, 4, faulty, &wrapped).is_ok());
    }

    #[test]
    fn pools_record_nested_objects() {
        let mut m = Mint::new(1);
        let a = m.sign(1, Payload::Binary { iteration: 0, node: 1, bit: 0 });
        let outer = m.sign(2, Payload::flood(0, 2, 1, [a.clone()]));
        let mut pool = ObservationPool::default();
        pool.record(&outer);
        assert!(pool.contains(&a) && pool.contains(&outer));
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn trace_form() {
        let mut m = Mint::new(1);
        let o = m.sign(3, Payload::Value { round: 2, node: 3, value: Real(0.25) });
        assert_eq!(o.payload().text(), "r2:(3,0.25)");
        assert_eq!(alloc::format!("{}", o.tag()).len(), 64);
    }
}
