//! Errors shared by the two simulation kernels.

use alloc::string::String;

use thiserror::Error;

use crate::auth::AuthError;
use crate::conditions::{Condition, ConditionError, Witness};
use crate::graph::{GraphError, NodeId, NodeSet};

/// Misbehaviour by an adversary that the kernel refuses to carry out.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("node {from} has no edge to {to}")]
    TopologyBreach { from: NodeId, to: NodeId },
    #[error("adversary acted for non-faulty node {node}")]
    NotFaulty { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("graph violates Condition {condition} for f = {f}")]
    ConditionViolated { condition: Condition, f: usize, witness: Option<Witness> },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("adversary protocol breach: {0}")]
    AdversaryProtocolBreach(#[from] AdversaryError),
    #[error("internal invariant broken: {0}")]
    InternalInvariantBroken(String),
    #[error("event queue drained while non-faulty nodes {blocked} had no output")]
    SchedulerStall { blocked: NodeSet },
    #[error("node {node} has no values left after trimming in round {round}")]
    EmptyAfterTrim { node: NodeId, round: usize },
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
