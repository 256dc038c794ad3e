//! Execution reports: scenario echo, outputs, audited verdicts.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::asynchronous::{AsyncExecution, Schedule};
use crate::graph::{NodeId, NodeSet};
use crate::sync::SyncExecution;

/// Slack on every real-valued comparison.
pub const FLOAT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sync,
    Async,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    pub termination: Verdict,
    pub validity: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_agreement: Option<Verdict>,
}

impl Verdicts {
    /// `(name, verdict)` for every verdict present.
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Verdict)> {
        [
            ("termination", Some(&self.termination)),
            ("validity", Some(&self.validity)),
            ("agreement", self.agreement.as_ref()),
            ("epsilon_agreement", self.epsilon_agreement.as_ref()),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.map(|v| (name, v)))
    }
}

/// A trace property checked over every step it applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Audit {
    pub name: String,
    pub pass: bool,
    pub checked: u64,
    /// The first few failures.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

const MAX_FAILURES: usize = 5;

impl Audit {
    pub(crate) fn new(name: &str) -> Self {
        Self { name: name.into(), pass: true, checked: 0, failures: Vec::new() }
    }

    pub(crate) fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.pass = false;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(describe());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Values {
    Binary(BTreeMap<NodeId, u8>),
    Real(BTreeMap<NodeId, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub mode: Mode,
    pub n: usize,
    pub f: usize,
    pub faulty: NodeSet,
    pub adversary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    pub mint_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    pub allow_violating: bool,
}

/// Logical cost of the run; no wall-clock time is recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Timing {
    pub messages: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end_time: Option<u64>,
}

/// Non-faulty value range after `round` rounds (round 0: inputs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangePoint {
    pub round: usize,
    pub nodes: usize,
    pub s_min: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Trace {
    Sync(SyncExecution),
    Async(AsyncExecution),
}

/// What a scripted attack did and how it came out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackInfo {
    pub script: String,
    /// The condition clause the graph violates.
    pub target: String,
    pub witness: BTreeMap<String, NodeSet>,
    /// "agreement violated (necessity demonstrated)" or
    /// "attack ineffective against this protocol".
    pub outcome: String,
    /// Decision times recorded in reference runs, by name.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub reference_times: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionReport {
    pub scenario: Scenario,
    pub inputs: Values,
    pub outputs: Values,
    pub verdicts: Verdicts,
    pub audits: Vec<Audit>,
    /// Every verdict and audit passed.
    pub pass: bool,
    /// Validity or (epsilon-)agreement failed.
    pub safety_violated: bool,
    /// Names of the failed verdicts.
    pub violated: Vec<String>,
    pub timing: Timing,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub range_series: Vec<RangePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
}

impl ExecutionReport {
    pub(crate) fn finish(&mut self) {
        self.violated = self.verdicts.iter().filter(|(_, v)| !v.pass).map(|(n, _)| String::from(n)).collect();
        self.safety_violated = self.violated.iter().any(|n| n != "termination");
        self.pass = self.violated.is_empty() && self.audits.iter().all(|a| a.pass);
    }

    pub fn audit(&self, name: &str) -> Option<&Audit> {
        self.audits.iter().find(|a| a.name == name)
    }

    /// Drops the full trace.
    pub fn without_trace(mut self) -> Self {
        self.trace = None;
        self
    }
}
