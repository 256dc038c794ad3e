//! Corpus sweeps and randomized protocol campaigns. Trials run in parallel;
//! every summary is folded in trial order, so output is independent of the
//! thread count.

use std::collections::BTreeMap;

use byzlab_core::adversary::{builtin_strategies, AsyncStrategy, Strategy, SyncStrategy};
use byzlab_core::asynchronous::{run_async, AsyncOptions, Schedule};
use byzlab_core::audit::{audit_async, audit_sync};
use byzlab_core::conditions::{
    audit_lemmas, verify_equivalences, verify_implication_chain, ConditionError, LemmaAudit, WorkBudget,
};
use byzlab_core::graph::{subsets_of_size, DiGraph, EdgeList, NodeId, NodeSet};
use byzlab_core::report::{ExecutionReport, Mode};
use byzlab_core::search::{self, chain_pattern};
use byzlab_core::sync::{run_sync, SyncOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// A graph with the fault bound it is evaluated under.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusGraph {
    pub graph: DiGraph,
    pub f: usize,
}

/// Every digraph on `n` nodes, each with fault bound `f`.
pub fn exhaustive_corpus(n: usize, f: usize) -> Vec<CorpusGraph> {
    let pairs = n * (n - 1);
    assert!(pairs < 63, "exhaustive corpora need n <= 8");
    (0..1u64 << pairs).map(|code| CorpusGraph { graph: DiGraph::from_code(n, code).unwrap(), f }).collect()
}

/// `count` seeded random graphs per `f` in `fs`, with `f + 2 <= n <= n_max`.
pub fn random_corpus(count: usize, n_max: usize, fs: &[usize], seed: u64) -> Vec<CorpusGraph> {
    fs.iter()
        .flat_map(|&f| {
            search::random_corpus(count, f + 2, n_max, seed ^ (f as u64) << 32)
                .into_iter()
                .map(move |graph| CorpusGraph { graph, f })
        })
        .collect()
}

/// Exhaustive `n = 4, f = 1` plus `count` random graphs per `f` in {1, 2}.
pub fn standard_corpus(count: usize, seed: u64) -> Vec<CorpusGraph> {
    let mut out = exhaustive_corpus(4, 1);
    out.extend(random_corpus(count, 8, &[1, 2], seed));
    out
}

fn sample<T: Clone>(items: &mut Vec<T>, item: T) {
    if items.len() < MAX_EXAMPLES {
        items.push(item);
    }
}

const MAX_EXAMPLES: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EquivalenceSummary {
    pub graphs: u64,
    pub condition_s: u64,
    pub condition_a: u64,
    pub mismatches: u64,
    pub errors: u64,
    pub examples: Vec<String>,
}

impl EquivalenceSummary {
    pub fn ok(&self) -> bool {
        self.mismatches == 0 && self.errors == 0
    }
}

pub fn equivalence_sweep(corpus: &[CorpusGraph], budget: WorkBudget) -> EquivalenceSummary {
    let results: Vec<_> = corpus.par_iter().map(|c| verify_equivalences(&c.graph, c.f, budget)).collect();
    let mut s = EquivalenceSummary::default();
    for r in results {
        s.graphs += 1;
        match r {
            Ok(r) => {
                s.condition_s += u64::from(r.s.holds);
                s.condition_a += u64::from(r.a.holds);
            }
            Err(ConditionError::EquivalenceViolation(msg)) => {
                s.mismatches += 1;
                sample(&mut s.examples, msg);
            }
            Err(e) => {
                s.errors += 1;
                sample(&mut s.examples, e.to_string());
            }
        }
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChainSummary {
    pub graphs: u64,
    pub violations: u64,
    pub errors: u64,
    /// Verdict vectors (weakest link first, `1` = holds) and their counts.
    pub patterns: BTreeMap<String, u64>,
    pub examples: Vec<String>,
}

impl ChainSummary {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.errors == 0
    }
}

pub fn chain_sweep(corpus: &[CorpusGraph], budget: WorkBudget) -> ChainSummary {
    let results: Vec<_> = corpus.par_iter().map(|c| verify_implication_chain(&c.graph, c.f, budget)).collect();
    let mut s = ChainSummary::default();
    for r in results {
        s.graphs += 1;
        match r {
            Ok(report) => {
                let key: String = report.pattern().iter().map(|&h| if h { '1' } else { '0' }).collect();
                *s.patterns.entry(key).or_default() += 1;
            }
            Err(ConditionError::ChainViolation(msg)) => {
                s.violations += 1;
                sample(&mut s.examples, msg);
            }
            Err(e) => {
                s.errors += 1;
                sample(&mut s.examples, e.to_string());
            }
        }
    }
    s
}

/// Separating graph (f = 1) for each adjacent pair of the chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separator {
    pub link: usize,
    pub graph: Option<EdgeList>,
    pub pattern: Option<[bool; 5]>,
}

pub fn find_separators(n_max: usize, seed: u64, budget: WorkBudget) -> Vec<Separator> {
    (0..4)
        .into_par_iter()
        .map(|link| {
            let g = search::find_separation(link, 1, n_max, seed, 200_000);
            Separator {
                link,
                pattern: g.as_ref().and_then(|g| chain_pattern(g, 1, budget).ok()),
                graph: g.as_ref().map(EdgeList::from),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub graphs: u64,
    /// Graphs satisfying Condition S, the only ones audited.
    pub audited: u64,
    pub checks: BTreeMap<String, u64>,
    pub violations: u64,
    pub errors: u64,
    pub examples: Vec<String>,
}

impl LemmaSummary {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.errors == 0
    }
}

pub fn lemma_sweep(corpus: &[CorpusGraph]) -> LemmaSummary {
    let results: Vec<_> = corpus.par_iter().map(|c| audit_lemmas(&c.graph, c.f)).collect();
    let mut total = LemmaAudit::default();
    let mut s = LemmaSummary::default();
    for r in results {
        s.graphs += 1;
        match r {
            Ok(Some(a)) => {
                s.audited += 1;
                total.merge(a);
            }
            Ok(None) => {}
            Err(e) => {
                s.errors += 1;
                sample(&mut s.examples, e.to_string());
            }
        }
    }
    s.violations = total.violations.len() as u64;
    for v in total.violations.iter().take(MAX_EXAMPLES) {
        s.examples.push(format!("{v:?}"));
    }
    s.checks = [
        ("l_sf_reach_Fstar", total.source_reach),
        ("l_component_size", total.component_size),
        ("l_out_neighbors", total.out_neighbors),
        ("l_match_size", total.match_size),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    s
}

/// Condition-S graphs for synchronous campaigns: K3 (f = 1), K5 (f = 2),
/// edge-minimal graphs and seeded random graphs.
pub fn sync_campaign_corpus(random: usize, seed: u64) -> Vec<CorpusGraph> {
    let budget = WorkBudget::default();
    let mut out = vec![
        CorpusGraph { graph: DiGraph::complete(3).unwrap(), f: 1 },
        CorpusGraph { graph: DiGraph::complete(5).unwrap(), f: 2 },
    ];
    for (n, f) in [(4, 1), (5, 1), (6, 1), (7, 1), (5, 2), (6, 2)] {
        let holds = |g: &DiGraph| byzlab_core::conditions::check_condition_s(g, f, budget).is_ok_and(|v| v.holds);
        out.push(CorpusGraph { graph: search::sparsify(&DiGraph::complete(n).unwrap(), holds), f });
    }
    for (f, share) in [(1, random - random / 3), (2, random / 3)] {
        let graphs = search::condition_s_corpus(share, 8, f, seed ^ (f as u64) << 32);
        out.extend(graphs.into_iter().map(|graph| CorpusGraph { graph, f }));
    }
    out
}

/// Condition-A graphs for asynchronous campaigns: K4 (f = 1), K7 (f = 2)
/// and seeded random graphs with f = 1.
pub fn async_campaign_corpus(random: usize, seed: u64) -> Vec<CorpusGraph> {
    let mut out = vec![
        CorpusGraph { graph: DiGraph::complete(4).unwrap(), f: 1 },
        CorpusGraph { graph: DiGraph::complete(7).unwrap(), f: 2 },
    ];
    let graphs = search::condition_a_corpus(random, 8, 1, seed);
    out.extend(graphs.into_iter().map(|graph| CorpusGraph { graph, f: 1 }));
    out
}

fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A uniformly drawn faulty set of exactly `f` nodes.
fn draw_faulty(rng: &mut ChaCha8Rng, g: &DiGraph, f: usize) -> NodeSet {
    let all: Vec<NodeSet> = subsets_of_size(g.nodes(), f).collect();
    all[rng.random_range(0..all.len())]
}

/// Binary input pattern `p`: all 0, all 1, by parity, lower half 0, then
/// seeded random patterns.
pub fn binary_pattern(g: &DiGraph, p: usize, rng: &mut ChaCha8Rng) -> BTreeMap<NodeId, u8> {
    let n = g.node_count();
    g.nodes()
        .iter()
        .map(|v| {
            let bit = match p {
                0 => false,
                1 => true,
                2 => v % 2 == 0,
                3 => v > n / 2,
                _ => rng.random_bool(0.5),
            };
            (v, u8::from(bit))
        })
        .collect()
}

/// Outcome of one campaign trial, kept only for failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub graph: EdgeList,
    pub f: usize,
    pub adversary: String,
    pub faulty: NodeSet,
    pub violated: Vec<String>,
    pub failed_audits: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub mode: Mode,
    pub graphs: usize,
    pub trials: u64,
    pub passed: u64,
    pub failed: u64,
    pub verdict_failures: BTreeMap<String, u64>,
    pub audit_checks: BTreeMap<String, u64>,
    pub audit_failures: BTreeMap<String, u64>,
    pub examples: Vec<TrialFailure>,
}

impl CampaignSummary {
    fn new(mode: Mode, graphs: usize) -> Self {
        Self {
            mode,
            graphs,
            trials: 0,
            passed: 0,
            failed: 0,
            verdict_failures: BTreeMap::new(),
            audit_checks: BTreeMap::new(),
            audit_failures: BTreeMap::new(),
            examples: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.trials > 0
    }

    fn add(&mut self, trial: u64, c: &CorpusGraph, adversary: String, faulty: NodeSet, r: Result<ExecutionReport, String>) {
        self.trials += 1;
        let report = match r {
            Ok(report) => report,
            Err(error) => {
                self.failed += 1;
                *self.verdict_failures.entry("error".into()).or_default() += 1;
                let failure = TrialFailure {
                    trial,
                    graph: EdgeList::from(&c.graph),
                    f: c.f,
                    adversary,
                    faulty,
                    violated: Vec::new(),
                    failed_audits: Vec::new(),
                    error: Some(error),
                };
                sample(&mut self.examples, failure);
                return;
            }
        };
        for a in &report.audits {
            *self.audit_checks.entry(a.name.clone()).or_default() += a.checked;
            if !a.pass {
                *self.audit_failures.entry(a.name.clone()).or_default() += 1;
            }
        }
        for v in &report.violated {
            *self.verdict_failures.entry(v.clone()).or_default() += 1;
        }
        if report.pass {
            self.passed += 1;
        } else {
            self.failed += 1;
            let failure = TrialFailure {
                trial,
                graph: EdgeList::from(&c.graph),
                f: c.f,
                adversary,
                faulty,
                violated: report.violated.clone(),
                failed_audits: report.audits.iter().filter(|a| !a.pass).map(|a| a.name.clone()).collect(),
                error: None,
            };
            sample(&mut self.examples, failure);
        }
    }
}

/// Synchronous trial `i`: graph `i mod G`, strategy `(i / G) mod S`, input
/// pattern `i / (G S)`; the faulty set is drawn from the trial seed.
pub fn sync_campaign(corpus: &[CorpusGraph], trials: u64, seed: u64) -> CampaignSummary {
    let strategies = builtin_strategies();
    let g_count = corpus.len() as u64;
    let s_count = strategies.len() as u64;
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let c = &corpus[(i % g_count) as usize];
            let strategy = seeded(&strategies[((i / g_count) % s_count) as usize], seed ^ i);
            let pattern = (i / (g_count * s_count)) as usize;
            let mut rng = trial_rng(seed, i);
            let faulty = draw_faulty(&mut rng, &c.graph, c.f);
            let inputs = binary_pattern(&c.graph, pattern, &mut rng);
            let options = SyncOptions { allow_violating: false, mint_seed: seed ^ i, record_messages: false };
            let name = strategy.name();
            let r = run_sync(&c.graph, c.f, &inputs, faulty, &mut SyncStrategy::new(strategy), options)
                .map(|ex| audit_sync(&ex, &options).without_trace())
                .map_err(|e| e.to_string());
            (i, name, faulty, r)
        })
        .collect();
    let mut summary = CampaignSummary::new(Mode::Sync, corpus.len());
    for (i, name, faulty, r) in results {
        summary.add(i, &corpus[(i % g_count) as usize], name, faulty, r);
    }
    summary
}

/// Gives seeded strategies a per-trial seed.
fn seeded(strategy: &Strategy, seed: u64) -> Strategy {
    match strategy {
        Strategy::OmitRandom { rate, .. } => Strategy::OmitRandom { seed, rate: *rate },
        other => other.clone(),
    }
}

/// Asynchronous trial `i`: graph `i mod G`, epsilon `(i / G) mod E`,
/// schedule seed `i / (G E)`; the strategy rotates with the trial index.
/// Inputs are uniform in `[0, 1]`.
pub fn async_campaign(corpus: &[CorpusGraph], epsilons: &[f64], trials: u64, seed: u64) -> CampaignSummary {
    let strategies = builtin_strategies();
    let g_count = corpus.len() as u64;
    let e_count = epsilons.len() as u64;
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let c = &corpus[(i % g_count) as usize];
            let epsilon = epsilons[((i / g_count) % e_count) as usize];
            let schedule_seed = seed.wrapping_add(i / (g_count * e_count));
            let strategy = seeded(&strategies[(i % strategies.len() as u64) as usize], seed ^ i);
            let mut rng = trial_rng(seed, i);
            let faulty = draw_faulty(&mut rng, &c.graph, c.f);
            let inputs: BTreeMap<NodeId, f64> = c.graph.nodes().iter().map(|v| (v, rng.random::<f64>())).collect();
            let options = AsyncOptions {
                allow_violating: false,
                mint_seed: seed ^ i,
                schedule: Schedule::random(schedule_seed, 8),
                record_messages: false,
            };
            let name = strategy.name();
            let r = run_async(&c.graph, c.f, epsilon, &inputs, faulty, &mut AsyncStrategy::new(strategy), &options)
                .map(|ex| audit_async(&ex, &options).without_trace())
                .map_err(|e| e.to_string());
            (i, name, faulty, r)
        })
        .collect();
    let mut summary = CampaignSummary::new(Mode::Async, corpus.len());
    for (i, name, faulty, r) in results {
        summary.add(i, &corpus[(i % g_count) as usize], name, faulty, r);
    }
    summary
}
