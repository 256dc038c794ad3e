//! Scenario files for single simulation runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use byzlab_core::adversary::{AsyncStrategy, PersonaScript, Strategy, SyncStrategy};
use byzlab_core::asynchronous::{run_async, AsyncOptions, DelayModel, Schedule, WithholdRule};
use byzlab_core::audit::{audit_async, audit_sync};
use byzlab_core::graph::{DiGraph, EdgeList, NodeId, NodeSet};
use byzlab_core::report::{ExecutionReport, Mode};
use byzlab_core::sim::SimError;
use byzlab_core::sync::{run_sync, SyncOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{self, FormatError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Inline edge list or a path to a graph file, relative to the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Inline(EdgeList),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    /// Crash round for `crash-at-round`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Drop rate for `omit-random`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub personas: BTreeMap<NodeId, PersonaScript>,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self { kind: "crash".into(), seed: 0, k: None, rate: None, personas: BTreeMap::new() }
    }
}

impl AdversarySpec {
    pub fn strategy(&self) -> Result<Strategy, ScenarioError> {
        let strategy = match self.kind.as_str() {
            "crash-at-round" => Strategy::CrashAtRound { k: self.k.unwrap_or(1) },
            "omit-random" | "omit" => Strategy::OmitRandom { seed: self.seed, rate: self.rate.unwrap_or(0.5) },
            "scripted" => Strategy::Scripted { personas: self.personas.clone() },
            other => Strategy::parse(other, self.seed)
                .ok_or_else(|| ScenarioError::Invalid(format!("unknown adversary kind `{other}`")))?,
        };
        if let Strategy::OmitRandom { rate, .. } = strategy {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ScenarioError::Invalid(format!("omission rate {rate} is outside [0, 1]")));
            }
        }
        Ok(strategy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub delay_model: DelayModel,
    #[serde(default = "default_max_delay")]
    pub max_delay: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub withhold: Vec<WithholdRule>,
}

fn default_max_delay() -> u64 {
    Schedule::default().max_delay
}

impl Default for SchedulerSpec {
    fn default() -> Self {
        Self { seed: 0, delay_model: DelayModel::Fifo, max_delay: default_max_delay(), withhold: Vec::new() }
    }
}

impl From<&SchedulerSpec> for Schedule {
    fn from(s: &SchedulerSpec) -> Self {
        Schedule {
            model: s.delay_model,
            seed: s.seed,
            max_delay: s.max_delay,
            withhold: s.withhold.clone(),
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub graph: GraphSpec,
    pub f: usize,
    /// Binary for sync runs, real in `[0, 1]` for async runs. Faulty nodes
    /// may be omitted.
    pub inputs: BTreeMap<NodeId, f64>,
    #[serde(default)]
    pub faulty: NodeSet,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub scheduler: SchedulerSpec,
    #[serde(default)]
    pub mint_seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunFlags {
    pub allow_violating: bool,
    /// Keep the full execution trace, including every delivered message.
    pub trace: bool,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn graph(&self, base: &Path) -> Result<DiGraph, ScenarioError> {
        match &self.graph {
            GraphSpec::Inline(list) => Ok(DiGraph::try_from(list.clone()).map_err(FormatError::from)?),
            GraphSpec::File(path) => Ok(format::read(&base.join(path))?),
        }
    }

    fn full_inputs(&self, g: &DiGraph) -> Result<BTreeMap<NodeId, f64>, ScenarioError> {
        if let Some(v) = self.inputs.keys().find(|&&v| !g.contains_node(v)) {
            return Err(ScenarioError::Invalid(format!("input given for unknown node {v}")));
        }
        let mut out = BTreeMap::new();
        for v in g.nodes() {
            match self.inputs.get(&v) {
                Some(&x) => out.insert(v, x),
                None if self.faulty.contains(v) => out.insert(v, 0.0),
                None => return Err(ScenarioError::Invalid(format!("missing input for non-faulty node {v}"))),
            };
        }
        Ok(out)
    }

    /// Runs one trial and audits it. The trace is dropped unless requested.
    pub fn run(&self, mode: Mode, base: &Path, flags: RunFlags) -> Result<ExecutionReport, ScenarioError> {
        let g = self.graph(base)?;
        let inputs = self.full_inputs(&g)?;
        let strategy = self.adversary.strategy()?;
        let report = match mode {
            Mode::Sync => {
                let inputs = inputs
                    .iter()
                    .map(|(&v, &x)| match x {
                        0.0 => Ok((v, 0)),
                        1.0 => Ok((v, 1)),
                        _ => Err(ScenarioError::Invalid(format!("sync input of node {v} is {x}, expected 0 or 1"))),
                    })
                    .collect::<Result<BTreeMap<NodeId, u8>, _>>()?;
                let options = SyncOptions {
                    allow_violating: flags.allow_violating,
                    mint_seed: self.mint_seed,
                    record_messages: flags.trace,
                };
                let ex = run_sync(&g, self.f, &inputs, self.faulty, &mut SyncStrategy::new(strategy), options)?;
                audit_sync(&ex, &options)
            }
            Mode::Async => {
                let epsilon = self.epsilon.ok_or_else(|| ScenarioError::Invalid("async scenarios need epsilon".into()))?;
                let options = AsyncOptions {
                    allow_violating: flags.allow_violating,
                    mint_seed: self.mint_seed,
                    schedule: Schedule::from(&self.scheduler),
                    record_messages: flags.trace,
                };
                let mut adversary = AsyncStrategy::new(strategy);
                let ex = run_async(&g, self.f, epsilon, &inputs, self.faulty, &mut adversary, &options)?;
                audit_async(&ex, &options)
            }
        };
        Ok(if flags.trace { report } else { report.without_trace() })
    }
}

/// The per-round range series as CSV: `round,nodes,s_min,s_max`.
pub fn range_csv(report: &ExecutionReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for point in &report.range_series {
        w.serialize(point)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const K3_CRASH: &str = r#"{
        "graph": {"n": 3, "edges": [[1,2],[1,3],[2,1],[2,3],[3,1],[3,2]]},
        "f": 1,
        "inputs": {"1": 0, "2": 1},
        "faulty": [3],
        "adversary": {"kind": "crash", "seed": 0}
    }"#;

    #[test]
    fn sync_scenario_runs() {
        let s = ScenarioFile::parse(K3_CRASH).unwrap();
        let r = s.run(Mode::Sync, Path::new("."), RunFlags::default()).unwrap();
        assert!(r.pass, "{:?}", r.verdicts);
        assert!(r.trace.is_none());
        let traced = s.run(Mode::Sync, Path::new("."), RunFlags { trace: true, ..RunFlags::default() }).unwrap();
        assert!(traced.trace.is_some());
    }

    #[test]
    fn async_scenario_needs_epsilon_and_condition() {
        let s = ScenarioFile::parse(K3_CRASH).unwrap();
        assert!(matches!(s.run(Mode::Async, Path::new("."), RunFlags::default()), Err(ScenarioError::Invalid(_))));
        let s = ScenarioFile { epsilon: Some(0.25), ..s };
        let err = s.run(Mode::Async, Path::new("."), RunFlags::default()).unwrap_err();
        assert!(matches!(err, ScenarioError::Sim(SimError::ConditionViolated { .. })));
    }

    #[test]
    fn async_k4_reports_series() {
        let text = r#"{
            "graph": {"n": 4, "edges": [[1,2],[1,3],[1,4],[2,1],[2,3],[2,4],[3,1],[3,2],[3,4],[4,1],[4,2],[4,3]]},
            "f": 1, "epsilon": 0.25,
            "inputs": {"1": 0.0, "2": 1.0, "3": 0.5, "4": 0.2},
            "faulty": [4],
            "adversary": {"kind": "equivocate-real"},
            "scheduler": {"seed": 3, "delay_model": "adversarial-random"}
        }"#;
        let r = ScenarioFile::parse(text).unwrap().run(Mode::Async, Path::new("."), RunFlags::default()).unwrap();
        assert!(r.pass, "{:?}", r.verdicts);
        assert_eq!(r.scenario.r_max, Some(2));
        let csv = range_csv(&r).unwrap();
        assert!(csv.starts_with("round,nodes,s_min,s_max\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let s = ScenarioFile::parse(&K3_CRASH.replace(r#""2": 1"#, r#""2": 0.5"#)).unwrap();
        assert!(matches!(s.run(Mode::Sync, Path::new("."), RunFlags::default()), Err(ScenarioError::Invalid(_))));
        let s = ScenarioFile::parse(&K3_CRASH.replace(r#""faulty": [3]"#, r#""faulty": []"#)).unwrap();
        assert!(matches!(s.run(Mode::Sync, Path::new("."), RunFlags::default()), Err(ScenarioError::Invalid(_))));
        let s = ScenarioFile::parse(&K3_CRASH.replace("crash", "bribe")).unwrap();
        assert!(s.run(Mode::Sync, Path::new("."), RunFlags::default()).is_err());
    }
}
