//! Independent auditor: recomputes verdicts and trace properties from an
//! execution record, using only the true faulty set and the recorded data.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::asynchronous::{AsyncExecution, AsyncOptions};
use crate::graph::{binomial, NodeId, NodeSet};
use crate::report::{
    Audit, ExecutionReport, Mode, RangePoint, Scenario, Timing, Trace, Values, Verdict, Verdicts, FLOAT_SLACK,
};
use crate::sync::{SyncExecution, SyncOptions};

fn verdict(pass: bool, evidence: String) -> Verdict {
    Verdict { pass, evidence }
}

fn honest_nodes(n: usize, faulty: NodeSet) -> NodeSet {
    NodeSet::full(n).difference(faulty)
}

/// Report for a synchronous run, with verdicts and audits recomputed here.
pub fn audit_sync(ex: &SyncExecution, options: &SyncOptions) -> ExecutionReport {
    let honest = honest_nodes(ex.n, ex.faulty);
    let expected_iterations = binomial(ex.n, ex.f);
    let missing: NodeSet = honest.iter().filter(|v| !ex.outputs.contains_key(v)).collect();
    let termination = verdict(
        missing.is_empty() && ex.iterations.len() as u64 == expected_iterations,
        format!(
            "{} of {} non-faulty nodes output after {} of {} iterations",
            honest.len() - missing.len(),
            honest.len(),
            ex.iterations.len(),
            expected_iterations
        ),
    );

    let honest_inputs: BTreeSet<u8> = honest.iter().map(|v| ex.inputs[&v]).collect();
    let invalid: Vec<NodeId> =
        ex.outputs.iter().filter(|(_, y)| !honest_inputs.contains(y)).map(|(&v, _)| v).collect();
    let validity = verdict(
        invalid.is_empty(),
        if invalid.is_empty() {
            format!("every output is a non-faulty input {honest_inputs:?}")
        } else {
            format!("outputs of {invalid:?} are not among non-faulty inputs {honest_inputs:?}")
        },
    );

    let distinct: BTreeSet<u8> = ex.outputs.values().copied().collect();
    let agreement = verdict(
        distinct.len() <= 1,
        if distinct.len() <= 1 {
            format!("all non-faulty outputs equal {distinct:?}")
        } else {
            let split: BTreeMap<u8, Vec<NodeId>> = distinct
                .iter()
                .map(|&b| (b, ex.outputs.iter().filter(|(_, &y)| y == b).map(|(&v, _)| v).collect()))
                .collect();
            format!("outputs differ: {split:?}")
        },
    );

    // every new non-faulty value is a non-faulty value from the start of the iteration
    let mut l_validity = Audit::new("l_validity");
    // applied updates that change a value rest on a strict non-faulty majority
    let mut majority = Audit::new("majority_honesty");
    // all non-faulty Y-sets match in the first iteration whose F covers the faulty set
    let mut deciding = Audit::new("deciding_iteration_agreement");
    let mut decided = false;
    for it in &ex.iterations {
        let starts: BTreeSet<u8> = it.start.values().copied().collect();
        for up in &it.updates {
            l_validity.check(starts.contains(&up.outcome.value), || {
                format!("iteration {}: node {} moved to {} outside {starts:?}", it.entry.index, up.node, up.outcome.value)
            });
            if up.outcome.value != up.before && !up.outcome.used.is_empty() {
                let total = up.outcome.used.len();
                let good = up.outcome.used.iter().filter(|(w, _)| !ex.faulty.contains(*w)).count();
                majority.check(2 * good > total, || {
                    format!("iteration {}: node {} used {good} non-faulty of {total} values", it.entry.index, up.node)
                });
            }
        }
        if !decided && ex.faulty.is_subset(it.entry.f_set) {
            decided = true;
            let mut sets = it.y_sets.values();
            if let Some(first) = sets.next() {
                let same = sets.all(|y| y == first);
                deciding.check(same, || format!("iteration {}: Y-sets differ {:?}", it.entry.index, it.y_sets));
            }
        }
    }

    let mut report = ExecutionReport {
        scenario: Scenario {
            mode: Mode::Sync,
            n: ex.n,
            f: ex.f,
            faulty: ex.faulty,
            adversary: ex.adversary.clone(),
            epsilon: None,
            r_max: None,
            mint_seed: options.mint_seed,
            schedule: None,
            allow_violating: options.allow_violating,
        },
        inputs: Values::Binary(ex.inputs.clone()),
        outputs: Values::Binary(ex.outputs.clone()),
        verdicts: Verdicts { termination, validity, agreement: Some(agreement), epsilon_agreement: None },
        audits: alloc::vec![l_validity, majority, deciding],
        pass: false,
        safety_violated: false,
        violated: Vec::new(),
        timing: Timing { messages: ex.messages, rounds: Some(ex.rounds), events: None, end_time: None },
        range_series: Vec::new(),
        attack: None,
        trace: Some(Trace::Sync(ex.clone())),
    };
    report.finish();
    report
}

fn range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    values.into_iter().fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

/// Trimmed midpoint recomputed from a frozen multiset, written apart from
/// the protocol code.
fn recompute_midpoint(frozen: &[(NodeId, f64)], f: usize) -> Option<f64> {
    let mut per_node: BTreeMap<NodeId, BTreeSet<u64>> = BTreeMap::new();
    for &(w, s) in frozen {
        per_node.entry(w).or_default().insert(s.to_bits());
    }
    let removed = per_node.values().filter(|vals| vals.len() > 1).count();
    let mut kept: Vec<(f64, NodeId)> = per_node
        .iter()
        .filter(|(_, vals)| vals.len() == 1)
        .map(|(&w, vals)| (f64::from_bits(*vals.iter().next().expect("one value")), w))
        .collect();
    kept.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values").then(a.1.cmp(&b.1)));
    let cut = f.saturating_sub(removed);
    if kept.len() <= 2 * cut {
        return None;
    }
    let kept = &kept[cut..kept.len() - cut];
    Some((kept[0].0 + kept[kept.len() - 1].0) / 2.0)
}

/// Report for an asynchronous run, with verdicts and audits recomputed here.
pub fn audit_async(ex: &AsyncExecution, options: &AsyncOptions) -> ExecutionReport {
    let honest = honest_nodes(ex.n, ex.faulty);
    let missing: NodeSet = honest.iter().filter(|v| !ex.outputs.contains_key(v)).collect();
    let termination = verdict(
        missing.is_empty(),
        if missing.is_empty() {
            format!("all {} non-faulty nodes output after {} rounds", honest.len(), ex.r_max)
        } else {
            format!("non-faulty nodes {missing} never output")
        },
    );

    let (lo, hi) = range(honest.iter().map(|v| ex.inputs[&v])).unwrap_or((0.0, 0.0));
    let outside: Vec<NodeId> = ex
        .outputs
        .iter()
        .filter(|(_, &y)| y < lo - FLOAT_SLACK || y > hi + FLOAT_SLACK)
        .map(|(&v, _)| v)
        .collect();
    let validity = verdict(
        outside.is_empty(),
        if outside.is_empty() {
            format!("every output lies in the non-faulty input range [{lo}, {hi}]")
        } else {
            format!("outputs of {outside:?} leave the non-faulty input range [{lo}, {hi}]")
        },
    );

    let (ylo, yhi) = range(ex.outputs.values().copied()).unwrap_or((0.0, 0.0));
    let spread = yhi - ylo;
    let epsilon_agreement = verdict(
        spread <= ex.epsilon + FLOAT_SLACK,
        format!("max pairwise output difference {spread} against epsilon {}", ex.epsilon),
    );

    let mut round_count = Audit::new("round_count");
    let mut contraction = Audit::new("range_contraction");
    let mut round_validity = Audit::new("round_validity");
    let mut overlap = Audit::new("interval_overlap");
    let mut midpoint = Audit::new("midpoint_recomputation");

    for (&v, records) in &ex.rounds {
        if ex.outputs.contains_key(&v) {
            let numbered = records.iter().enumerate().all(|(i, r)| r.round == i + 1);
            round_count.check(records.len() == ex.r_max && numbered, || {
                format!("node {v} completed {} rounds, expected {}", records.len(), ex.r_max)
            });
        }
        for r in records {
            let expected = recompute_midpoint(&r.frozen, ex.f);
            let ok = match expected {
                Some(x) => (x - r.value).abs() <= FLOAT_SLACK,
                // only reachable when the condition gate was overridden
                None => options.allow_violating && r.value == r.start,
            };
            midpoint.check(ok, || format!("node {v} round {}: recorded {} recomputed {expected:?}", r.round, r.value));
        }
    }

    let mut series = Vec::new();
    if let Some((a, b)) = range(honest.iter().map(|v| ex.inputs[&v])) {
        series.push(RangePoint { round: 0, nodes: honest.len(), s_min: a, s_max: b });
    }
    for round in 1..=ex.r_max {
        let recs: Vec<(NodeId, &crate::asynchronous::RoundRecord)> = ex
            .rounds
            .iter()
            .filter_map(|(&v, rs)| rs.iter().find(|r| r.round == round).map(|r| (v, r)))
            .collect();
        // values the non-faulty nodes sent this round, and what they moved to
        let Some((alo, ahi)) = range(recs.iter().map(|(_, r)| r.start)) else { break };
        let (nlo, nhi) = range(recs.iter().map(|(_, r)| r.value)).expect("nonempty");
        series.push(RangePoint { round, nodes: recs.len(), s_min: nlo, s_max: nhi });
        contraction.check(nhi - nlo <= (ahi - alo) / 2.0 + FLOAT_SLACK, || {
            format!("round {round}: range {} after, {} before", nhi - nlo, ahi - alo)
        });
        for (v, r) in &recs {
            round_validity.check(r.value >= alo - FLOAT_SLACK && r.value <= ahi + FLOAT_SLACK, || {
                format!("node {v} round {round}: {} outside [{alo}, {ahi}]", r.value)
            });
        }
        for (i, (u, ru)) in recs.iter().enumerate() {
            for (v, rv) in &recs[i + 1..] {
                let meet = ru.m.max(rv.m) <= ru.big_m.min(rv.big_m) + FLOAT_SLACK;
                overlap.check(meet, || {
                    format!("round {round}: [{}, {}] at {u} and [{}, {}] at {v} are disjoint", ru.m, ru.big_m, rv.m, rv.big_m)
                });
            }
        }
    }

    let mut report = ExecutionReport {
        scenario: Scenario {
            mode: Mode::Async,
            n: ex.n,
            f: ex.f,
            faulty: ex.faulty,
            adversary: ex.adversary.clone(),
            epsilon: Some(ex.epsilon),
            r_max: Some(ex.r_max),
            mint_seed: options.mint_seed,
            schedule: Some(options.schedule.clone()),
            allow_violating: options.allow_violating,
        },
        inputs: Values::Real(ex.inputs.clone()),
        outputs: Values::Real(ex.outputs.clone()),
        verdicts: Verdicts { termination, validity, agreement: None, epsilon_agreement: Some(epsilon_agreement) },
        audits: alloc::vec![round_count, contraction, round_validity, overlap, midpoint],
        pass: false,
        safety_violated: false,
        violated: Vec::new(),
        timing: Timing { messages: ex.messages, rounds: None, events: Some(ex.events), end_time: Some(ex.end_time) },
        range_series: series,
        attack: None,
        trace: Some(Trace::Async(ex.clone())),
    };
    report.finish();
    report
}
