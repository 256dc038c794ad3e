//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p byzlab --test acceptance`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use byzlab::recipe::fixtures;
use byzlab::sweep::{self, CampaignSummary, CorpusGraph};
use byzlab_core::adversary::{
    attack_small_intersection_async, attack_small_source_sync, attack_two_sources, find_small_intersection,
    find_small_source, find_two_sources, AttackOptions, DEMO_EPSILON,
};
use byzlab_core::conditions::{chain_links, WorkBudget, DEFAULT_WORK_BUDGET};
use byzlab_core::graph::{max_bipartite_matching, NodeId};
use byzlab_core::report::{ExecutionReport, Mode, Values};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;
const RANDOM_PER_F: usize = 10_000;
const SLACK: f64 = 1e-12;
const ASYNC_EPSILONS: [f64; 3] = [0.25, 1.0 / 64.0, 1.0 / 1024.0];

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized artifacts, compared byte for byte on a rerun.
    artifacts: Vec<String>,
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn budget() -> WorkBudget {
    WorkBudget(DEFAULT_WORK_BUDGET)
}

fn corpus() -> Vec<CorpusGraph> {
    sweep::standard_corpus(RANDOM_PER_F, SEED)
}

fn equivalence_s(corpus: &[CorpusGraph]) -> Outcome {
    let s = sweep::equivalence_sweep(corpus, budget());
    let exhaustive = corpus.iter().filter(|c| c.graph.node_count() == 4 && c.f == 1).count();
    let random = corpus.len() - 4096;
    let pass = s.ok() && exhaustive >= 4096 && random >= 10_000 && s.graphs as usize == corpus.len();
    let detail = format!(
        "{} graphs ({random} random, n <= 8, f in {{1,2}}), {} satisfy S, {} mismatches, {} errors",
        s.graphs, s.condition_s, s.mismatches, s.errors
    );
    Outcome { pass, detail, artifacts: vec![json(&s)] }
}

fn equivalence_a(corpus: &[CorpusGraph]) -> Outcome {
    // Both equivalences come out of one sweep; this re-reads the A side.
    let s = sweep::equivalence_sweep(corpus, budget());
    let detail = format!("{} graphs, {} satisfy A, {} mismatches, {} errors", s.graphs, s.condition_a, s.mismatches, s.errors);
    Outcome { pass: s.ok() && s.graphs as usize == corpus.len(), detail, artifacts: vec![json(&s)] }
}

fn chain(corpus: &[CorpusGraph]) -> Outcome {
    let s = sweep::chain_sweep(corpus, budget());
    let seps = sweep::find_separators(8, SEED, budget());
    let mut found = 0;
    for sep in &seps {
        let Some(p) = sep.pattern else { continue };
        let n = sep.graph.as_ref().map_or(usize::MAX, |g| g.n);
        if n <= 8 && p[sep.link] && !p[sep.link + 1] {
            found += 1;
        }
    }
    // Monotone means each link implies the next-weaker one.
    let monotone_patterns = s.patterns.keys().all(|k| !k.contains("01"));
    let detail = format!(
        "{} graphs, {} distinct patterns, {} non-monotone, {found}/4 separating witnesses ({} links, f = 1)",
        s.graphs,
        s.patterns.len(),
        s.violations,
        chain_links(1).len() - 1
    );
    let pass = s.ok() && monotone_patterns && found == 4;
    Outcome { pass, detail, artifacts: vec![json(&s), json(&seps)] }
}

/// Maximum matching size by trying every assignment of left nodes.
fn brute_matching(left: &[NodeId], edges: &[(NodeId, NodeId)], used: &mut BTreeSet<NodeId>) -> usize {
    let Some((&l, rest)) = left.split_first() else { return 0 };
    let mut best = brute_matching(rest, edges, used);
    for &(a, r) in edges {
        if a == l && used.insert(r) {
            best = best.max(1 + brute_matching(rest, edges, used));
            used.remove(&r);
        }
    }
    best
}

fn matching_oracle(trials: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for _ in 0..trials {
        let nl = rng.random_range(0..=5);
        let nr = rng.random_range(0..=5);
        let left: Vec<NodeId> = (1..=nl).collect();
        let right: Vec<NodeId> = (nl + 1..=nl + nr).collect();
        let p = rng.random_range(0.0..1.0);
        let edges: Vec<(NodeId, NodeId)> =
            left.iter().flat_map(|&l| right.iter().map(move |&r| (l, r))).filter(|_| rng.random_bool(p)).collect();
        let m = max_bipartite_matching(left.iter().copied().collect(), right.iter().copied().collect(), &edges)
            .expect("valid bipartite input");
        let pairs = m.pairs();
        let valid = pairs.iter().all(|e| edges.contains(e))
            && pairs.iter().map(|&(l, _)| l).collect::<BTreeSet<_>>().len() == pairs.len()
            && pairs.iter().map(|&(_, r)| r).collect::<BTreeSet<_>>().len() == pairs.len();
        if !valid || m.len() != brute_matching(&left, &edges, &mut BTreeSet::new()) {
            mismatches += 1;
        }
    }
    (trials, mismatches)
}

fn lemmas(corpus: &[CorpusGraph]) -> Outcome {
    let s = sweep::lemma_sweep(corpus);
    let (trials, mismatches) = matching_oracle(5_000);
    let all_checked = ["l_sf_reach_Fstar", "l_component_size", "l_out_neighbors", "l_match_size"]
        .iter()
        .all(|k| s.checks.get(*k).is_some_and(|&c| c > 0));
    let detail = format!(
        "{} Condition-S graphs audited, checks {:?}, {} violations; matching vs brute force: {mismatches}/{trials} mismatches",
        s.audited, s.checks, s.violations
    );
    let pass = s.ok() && s.audited > 0 && all_checked && mismatches == 0;
    Outcome { pass, detail, artifacts: vec![json(&s)] }
}

fn audits_clean(s: &CampaignSummary, names: &[&str]) -> bool {
    names.iter().all(|n| s.audit_checks.get(*n).is_some_and(|&c| c > 0) && !s.audit_failures.contains_key(*n))
}

fn sync_campaign() -> Outcome {
    let graphs = sweep::sync_campaign_corpus(48, SEED);
    let has_k3 = graphs.iter().any(|c| c.f == 1 && c.graph.node_count() == 3 && c.graph.edge_count() == 6);
    let has_k5 = graphs.iter().any(|c| c.f == 2 && c.graph.node_count() == 5 && c.graph.edge_count() == 20);
    let trials = graphs.len() as u64 * 7 * 10;
    let s = sweep::sync_campaign(&graphs, trials, SEED);
    let detail = format!(
        "{} graphs x 7 adversaries x 10 patterns: {}/{} passed, audits {:?}, failures {:?}",
        s.graphs, s.passed, s.trials, s.audit_checks, s.verdict_failures
    );
    let pass = s.ok()
        && s.passed == trials
        && graphs.len() >= 50
        && has_k3
        && has_k5
        && audits_clean(&s, &["l_validity", "majority_honesty"]);
    Outcome { pass, detail, artifacts: vec![json(&s)] }
}

fn async_campaign() -> Outcome {
    let graphs = sweep::async_campaign_corpus(18, SEED);
    let has_k4 = graphs.iter().any(|c| c.f == 1 && c.graph.node_count() == 4 && c.graph.edge_count() == 12);
    let has_k7 = graphs.iter().any(|c| c.f == 2 && c.graph.node_count() == 7 && c.graph.edge_count() == 42);
    let trials = graphs.len() as u64 * ASYNC_EPSILONS.len() as u64 * 20;
    let s = sweep::async_campaign(&graphs, &ASYNC_EPSILONS, trials, SEED);
    let detail = format!(
        "{} graphs x 3 epsilons x 20 schedules: {}/{} passed, audits {:?}, failures {:?}",
        s.graphs, s.passed, s.trials, s.audit_checks, s.verdict_failures
    );
    let pass = s.ok()
        && s.passed == trials
        && graphs.len() >= 20
        && has_k4
        && has_k7
        && !s.verdict_failures.contains_key("epsilon_agreement")
        && audits_clean(&s, &["round_count", "range_contraction", "interval_overlap"]);
    Outcome { pass, detail, artifacts: vec![json(&s)] }
}

/// Safety recomputed from inputs, outputs and the faulty set alone.
fn safety_violated(r: &ExecutionReport) -> bool {
    let faulty = r.scenario.faulty;
    let honest = |v: &NodeId| !faulty.contains(*v);
    match (&r.inputs, &r.outputs) {
        (Values::Binary(inp), Values::Binary(out)) => {
            let allowed: BTreeSet<u8> = inp.iter().filter(|(v, _)| honest(v)).map(|(_, &x)| x).collect();
            let outs: BTreeSet<u8> = out.iter().filter(|(v, _)| honest(v)).map(|(_, &y)| y).collect();
            outs.len() > 1 || !outs.is_subset(&allowed)
        }
        (Values::Real(inp), Values::Real(out)) => {
            let honest_in: Vec<f64> = inp.iter().filter(|(v, _)| honest(v)).map(|(_, &x)| x).collect();
            let outs: Vec<f64> = out.iter().filter(|(v, _)| honest(v)).map(|(_, &y)| y).collect();
            let lo = honest_in.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = honest_in.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let invalid = outs.iter().any(|&y| y < lo - SLACK || y > hi + SLACK);
            let spread = outs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - outs.iter().copied().fold(f64::INFINITY, f64::min);
            let eps = r.scenario.epsilon.unwrap_or(0.0);
            invalid || (outs.len() > 1 && spread > eps + SLACK)
        }
        _ => true,
    }
}

fn attacks() -> Outcome {
    let opts = AttackOptions::default();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut artifacts = Vec::new();
    let mut record = |name: &str, r: Result<ExecutionReport, String>, must_violate: Option<&str>| {
        match r {
            Ok(r) => {
                let recomputed = safety_violated(&r);
                let agrees = recomputed == r.safety_violated;
                let outcome = r.attack.as_ref().map_or("?", |a| a.outcome.as_str()).to_string();
                let ok = agrees
                    && match must_violate {
                        Some(v) => r.safety_violated && r.violated.iter().any(|n| n == v),
                        None => !outcome.is_empty(),
                    }
                    && (r.scenario.mode == Mode::Sync || r.scenario.epsilon == Some(DEMO_EPSILON));
                pass &= ok;
                lines.push(format!("{name}: {outcome} (recomputed safety_violated = {recomputed})"));
                artifacts.push(json(&r));
            }
            Err(e) => {
                pass = false;
                lines.push(format!("{name}: error {e}"));
            }
        }
    };

    let two = fixtures::two_cycles();
    for mode in [Mode::Sync, Mode::Async] {
        let r = find_two_sources(&two, 1)
            .ok_or_else(|| "no witness".to_string())
            .and_then(|(f, s0, s1)| attack_two_sources(&two, 1, f, s0, s1, mode, opts).map_err(|e| e.to_string()));
        let check = if mode == Mode::Sync { "agreement" } else { "epsilon_agreement" };
        record(&format!("two_sources {mode:?}"), r, Some(check));
    }

    let g = fixtures::small_intersection();
    let r = find_small_intersection(&g, 1)
        .ok_or_else(|| "no witness".to_string())
        .and_then(|(f, fp)| attack_small_intersection_async(&g, 1, f, fp, opts).map_err(|e| e.to_string()));
    record("small_intersection", r, Some("epsilon_agreement"));

    let c3 = fixtures::cycle3();
    let r = find_small_source(&c3, 1)
        .ok_or_else(|| "no witness".to_string())
        .and_then(|f| attack_small_source_sync(&c3, 1, f, opts).map_err(|e| e.to_string()));
    record("small_source_sync on the 3-cycle", r, None);

    Outcome { pass, detail: lines.join("; "), artifacts }
}

type Criterion = fn(&[CorpusGraph]) -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 7] = [
        ("1 equivalence S <=> 1-reach(f+1)", equivalence_s),
        ("2 equivalence A <=> 2-reach(f+1)", equivalence_a),
        ("3 implication chain", chain),
        ("4 lemma suite", lemmas),
        ("5 synchronous protocol", |_| sync_campaign()),
        ("6 asynchronous protocol", |_| async_campaign()),
        ("7 necessity attacks", |_| attacks()),
    ];

    let corpus = corpus();
    let mut all = true;
    let mut first_run = Vec::new();
    for (name, run) in &criteria {
        let start = Instant::now();
        let o = run(&corpus);
        all &= o.pass;
        println!("{} [{name}] {} ({:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, start.elapsed().as_secs_f64());
        first_run.push(o.artifacts);
    }

    let start = Instant::now();
    let rerun_corpus = self::corpus();
    let same_corpus = json(&rerun_corpus.iter().map(|c| (&c.graph, c.f)).collect::<Vec<_>>())
        == json(&corpus.iter().map(|c| (&c.graph, c.f)).collect::<Vec<_>>());
    let mut differing = Vec::new();
    for ((name, run), before) in criteria.iter().zip(&first_run) {
        if run(&rerun_corpus).artifacts != *before {
            differing.push(*name);
        }
    }
    let deterministic = same_corpus && differing.is_empty();
    all &= deterministic;
    let bytes: usize = first_run.iter().flatten().map(String::len).sum();
    println!(
        "{} [8 determinism] {} criteria rerun, {bytes} JSON bytes compared, corpus identical: {same_corpus}, differing: {differing:?} ({:.1}s)",
        if deterministic { "PASS" } else { "FAIL" },
        criteria.len(),
        start.elapsed().as_secs_f64()
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
