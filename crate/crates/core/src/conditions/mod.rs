//! Exhaustive checkers for the feasibility conditions: the k-reach family
//! with threshold `rho`, the source-component conditions S and A, and the
//! relations between them.
//!
//! All checks enumerate fault sets of every size `0..=f` in size-ascending
//! lexicographic order, so the first violation found (the witness) is
//! reproducible. Cost is exponential in `f`; a [`WorkBudget`] bounds it.

mod lemmas;
mod relations;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    reach_within, subsets_up_to, unique_source_component, DiGraph, GraphError, NodeId, NodeSet,
    Sources,
};

pub use lemmas::{audit_lemmas, LemmaAudit, LemmaKind, LemmaViolation};
pub use relations::{
    chain_links, verify_equivalences, verify_implication_chain, ChainReport, EquivalenceReport,
};

/// Default cap on reach-set intersection tests per check.
pub const DEFAULT_WORK_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkBudget(pub u64);

impl Default for WorkBudget {
    fn default() -> Self {
        Self(DEFAULT_WORK_BUDGET)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("f must satisfy n > f >= 1 (got n = {n}, f = {f})")]
    InvalidParams { n: usize, f: usize },
    #[error("rho must be at least 1")]
    InvalidRho,
    #[error("check needs about {required} reach-set evaluations, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },
    #[error("equivalence violated: {0}")]
    EquivalenceViolation(alloc::string::String),
    #[error("implication chain violated: {0}")]
    ChainViolation(alloc::string::String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "1-reach")]
    OneReach,
    #[serde(rename = "2-reach")]
    TwoReach,
    #[serde(rename = "3-reach")]
    ThreeReach,
    S,
    A,
}

impl Condition {
    pub fn takes_rho(self) -> bool {
        matches!(self, Condition::OneReach | Condition::TwoReach | Condition::ThreeReach)
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "1-reach" | "1reach" | "one-reach" => Some(Condition::OneReach),
            "2-reach" | "2reach" | "two-reach" => Some(Condition::TwoReach),
            "3-reach" | "3reach" | "three-reach" => Some(Condition::ThreeReach),
            "S" | "s" => Some(Condition::S),
            "A" | "a" => Some(Condition::A),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::OneReach => "1-reach",
            Condition::TwoReach => "2-reach",
            Condition::ThreeReach => "3-reach",
            Condition::S => "S",
            Condition::A => "A",
        })
    }
}

/// The first violation found by a checker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    OneReach { f_set: NodeSet, u: NodeId, v: NodeId, intersection: NodeSet },
    TwoReach { f1: NodeSet, f2: NodeSet, u: NodeId, v: NodeId, intersection: NodeSet },
    ThreeReach {
        f_set: NodeSet,
        f1: NodeSet,
        f2: NodeSet,
        u: NodeId,
        v: NodeId,
        intersection: NodeSet,
    },
    /// `G_F` has more than one source component.
    NotUnique { f_set: NodeSet, components: Vec<NodeSet> },
    /// `|S_F|` is below `required`.
    SmallSource { f_set: NodeSet, source: NodeSet, required: usize },
    /// `|S_F ∩ S_F'|` is at most `f`.
    SmallIntersection {
        f_set: NodeSet,
        f_prime: NodeSet,
        source: NodeSet,
        source_prime: NodeSet,
        intersection: NodeSet,
    },
}

impl Witness {
    /// Re-derives the violation from scratch. `rho` is ignored by the
    /// source-component witnesses.
    pub fn is_genuine(&self, g: &DiGraph, f: usize, rho: usize) -> bool {
        let reach = |fs: NodeSet, u: NodeId| crate::graph::reach_set(g, fs, u).ok();
        let unique = |fs: NodeSet| unique_source_component(g, fs).ok().and_then(|s| s.unique());
        let small = |s: NodeSet| s.len() <= f;
        match *self {
            Witness::OneReach { f_set, u, v, intersection } => {
                small(f_set)
                    && matches!((reach(f_set, u), reach(f_set, v)), (Some(a), Some(b))
                        if a.intersection(b) == intersection && intersection.len() < rho)
            }
            Witness::TwoReach { f1, f2, u, v, intersection } => {
                small(f1)
                    && small(f2)
                    && matches!((reach(f1, u), reach(f2, v)), (Some(a), Some(b))
                        if a.intersection(b) == intersection && intersection.len() < rho)
            }
            Witness::ThreeReach { f_set, f1, f2, u, v, intersection } => {
                small(f_set)
                    && small(f1)
                    && small(f2)
                    && matches!((reach(f_set.union(f1), u), reach(f_set.union(f2), v)),
                        (Some(a), Some(b)) if a.intersection(b) == intersection
                            && intersection.len() < rho)
            }
            Witness::NotUnique { f_set, ref components } => {
                small(f_set)
                    && components.len() >= 2
                    && matches!(unique_source_component(g, f_set),
                        Ok(Sources::NotUnique(ref c)) if c == components)
            }
            Witness::SmallSource { f_set, source, required } => {
                small(f_set) && unique(f_set) == Some(source) && source.len() < required
            }
            Witness::SmallIntersection { f_set, f_prime, source, source_prime, intersection } => {
                small(f_set)
                    && small(f_prime)
                    && unique(f_set) == Some(source)
                    && unique(f_prime) == Some(source_prime)
                    && source.intersection(source_prime) == intersection
                    && intersection.len() <= f
            }
        }
    }
}

/// Outcome of one condition check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub f: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<usize>,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl ConditionVerdict {
    fn new(condition: Condition, f: usize, rho: Option<usize>, witness: Option<Witness>) -> Self {
        Self { condition, f, rho, holds: witness.is_none(), witness }
    }
}

fn check_params(g: &DiGraph, f: usize) -> Result<(), ConditionError> {
    let n = g.node_count();
    if f < 1 || f >= n {
        return Err(ConditionError::InvalidParams { n, f });
    }
    Ok(())
}

fn fault_sets(g: &DiGraph, f: usize) -> Vec<NodeSet> {
    subsets_up_to(g.nodes(), f).collect()
}

fn charge(required: u64, budget: WorkBudget) -> Result<(), ConditionError> {
    if required > budget.0 {
        Err(ConditionError::BudgetExceeded { required, budget: budget.0 })
    } else {
        Ok(())
    }
}

/// Reach sets for every node of `V - F`, memoised per removed set.
struct ReachTable<'g> {
    g: &'g DiGraph,
    cache: BTreeMap<u64, Vec<(NodeId, NodeSet)>>,
}

impl<'g> ReachTable<'g> {
    fn new(g: &'g DiGraph) -> Self {
        Self { g, cache: BTreeMap::new() }
    }

    fn get(&mut self, removed: NodeSet) -> &[(NodeId, NodeSet)] {
        let g = self.g;
        self.cache.entry(removed.bits()).or_insert_with(|| {
            let alive = g.nodes().difference(removed);
            alive.iter().map(|u| (u, reach_within(g, alive, u))).collect()
        })
    }
}

/// 1-reach with parameter `rho`: for every `|F| <= f` and `u, v` in `V - F`
/// (possibly equal), `|reach_u(F) ∩ reach_v(F)| >= rho`.
pub fn check_1_reach(
    g: &DiGraph,
    f: usize,
    rho: usize,
    budget: WorkBudget,
) -> Result<ConditionVerdict, ConditionError> {
    check_params(g, f)?;
    if rho < 1 {
        return Err(ConditionError::InvalidRho);
    }
    let sets = fault_sets(g, f);
    let n = g.node_count() as u64;
    charge(sets.len() as u64 * n * n, budget)?;
    let mut table = ReachTable::new(g);
    for &f_set in &sets {
        let reach = table.get(f_set);
        for (i, &(u, ru)) in reach.iter().enumerate() {
            for &(v, rv) in &reach[i..] {
                let inter = ru.intersection(rv);
                if inter.len() < rho {
                    let w = Witness::OneReach { f_set, u, v, intersection: inter };
                    return Ok(ConditionVerdict::new(Condition::OneReach, f, Some(rho), Some(w)));
                }
            }
        }
    }
    Ok(ConditionVerdict::new(Condition::OneReach, f, Some(rho), None))
}

/// 2-reach with parameter `rho`: independent fault sets `F1`, `F2`.
pub fn check_2_reach(
    g: &DiGraph,
    f: usize,
    rho: usize,
    budget: WorkBudget,
) -> Result<ConditionVerdict, ConditionError> {
    check_params(g, f)?;
    if rho < 1 {
        return Err(ConditionError::InvalidRho);
    }
    let sets = fault_sets(g, f);
    let n = g.node_count() as u64;
    let k = sets.len() as u64;
    charge(k.saturating_mul(k).saturating_mul(n * n), budget)?;
    let mut table = ReachTable::new(g);
    for &s in &sets {
        table.get(s);
    }
    for &f1 in &sets {
        for &f2 in &sets {
            let r1 = &table.cache[&f1.bits()];
            let r2 = &table.cache[&f2.bits()];
            for &(u, ru) in r1 {
                for &(v, rv) in r2 {
                    let inter = ru.intersection(rv);
                    if inter.len() < rho {
                        let w = Witness::TwoReach { f1, f2, u, v, intersection: inter };
                        return Ok(ConditionVerdict::new(
                            Condition::TwoReach,
                            f,
                            Some(rho),
                            Some(w),
                        ));
                    }
                }
            }
        }
    }
    Ok(ConditionVerdict::new(Condition::TwoReach, f, Some(rho), None))
}

/// 3-reach with parameter `rho`: `reach_u(F ∪ F1) ∩ reach_v(F ∪ F2)`.
pub fn check_3_reach(
    g: &DiGraph,
    f: usize,
    rho: usize,
    budget: WorkBudget,
) -> Result<ConditionVerdict, ConditionError> {
    check_params(g, f)?;
    if rho < 1 {
        return Err(ConditionError::InvalidRho);
    }
    let sets = fault_sets(g, f);
    let n = g.node_count() as u64;
    let k = sets.len() as u64;
    charge(k.saturating_mul(k).saturating_mul(k).saturating_mul(n * n), budget)?;
    let mut table = ReachTable::new(g);
    for &f_set in &sets {
        for &f1 in &sets {
            let left = f_set.union(f1);
            if left == g.nodes() {
                continue;
            }
            table.get(left);
            for &f2 in &sets {
                let right = f_set.union(f2);
                if right == g.nodes() {
                    continue;
                }
                table.get(right);
                let r1 = &table.cache[&left.bits()];
                let r2 = &table.cache[&right.bits()];
                for &(u, ru) in r1 {
                    for &(v, rv) in r2 {
                        let inter = ru.intersection(rv);
                        if inter.len() < rho {
                            let w = Witness::ThreeReach { f_set, f1, f2, u, v, intersection: inter };
                            return Ok(ConditionVerdict::new(
                                Condition::ThreeReach,
                                f,
                                Some(rho),
                                Some(w),
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(ConditionVerdict::new(Condition::ThreeReach, f, Some(rho), None))
}

/// Every `G_F`, `|F| <= f`, has a unique source component `S_F`.
/// Returns the first violation or the full table of `(F, S_F)`.
pub fn source_table(g: &DiGraph, f: usize) -> Result<Result<Vec<(NodeSet, NodeSet)>, Witness>, ConditionError> {
    let mut out = Vec::new();
    for f_set in fault_sets(g, f) {
        match unique_source_component(g, f_set)? {
            Sources::Unique(s) => out.push((f_set, s)),
            Sources::NotUnique(components) => {
                return Ok(Err(Witness::NotUnique { f_set, components }))
            }
        }
    }
    Ok(Ok(out))
}

/// Condition S: unique source component of size at least `f + 1` for every
/// `|F| <= f`.
pub fn check_condition_s(
    g: &DiGraph,
    f: usize,
    budget: WorkBudget,
) -> Result<ConditionVerdict, ConditionError> {
    check_params(g, f)?;
    let sets = fault_sets(g, f);
    charge(sets.len() as u64 * g.node_count() as u64, budget)?;
    for f_set in sets {
        let witness = match unique_source_component(g, f_set)? {
            Sources::NotUnique(components) => Some(Witness::NotUnique { f_set, components }),
            Sources::Unique(source) if source.len() < f + 1 => {
                Some(Witness::SmallSource { f_set, source, required: f + 1 })
            }
            Sources::Unique(_) => None,
        };
        if witness.is_some() {
            return Ok(ConditionVerdict::new(Condition::S, f, None, witness));
        }
    }
    Ok(ConditionVerdict::new(Condition::S, f, None, None))
}

/// Condition A: unique source components of size at least `2f + 1`, any two
/// of which share at least `f + 1` nodes.
pub fn check_condition_a(
    g: &DiGraph,
    f: usize,
    budget: WorkBudget,
) -> Result<ConditionVerdict, ConditionError> {
    check_params(g, f)?;
    let k = fault_sets(g, f).len() as u64;
    charge(k * g.node_count() as u64 + k * k, budget)?;
    let table = match source_table(g, f)? {
        Ok(t) => t,
        Err(w) => return Ok(ConditionVerdict::new(Condition::A, f, None, Some(w))),
    };
    if let Some(&(f_set, source)) = table.iter().find(|(_, s)| s.len() < 2 * f + 1) {
        let w = Witness::SmallSource { f_set, source, required: 2 * f + 1 };
        return Ok(ConditionVerdict::new(Condition::A, f, None, Some(w)));
    }
    for (i, &(f_set, source)) in table.iter().enumerate() {
        for &(f_prime, source_prime) in &table[i..] {
            let intersection = source.intersection(source_prime);
            if intersection.len() < f + 1 {
                let w = Witness::SmallIntersection {
                    f_set,
                    f_prime,
                    source,
                    source_prime,
                    intersection,
                };
                return Ok(ConditionVerdict::new(Condition::A, f, None, Some(w)));
            }
        }
    }
    Ok(ConditionVerdict::new(Condition::A, f, None, None))
}

/// Dispatches to the named checker; `rho` defaults to 1 for reach
/// conditions and is ignored otherwise.
pub fn check(
    g: &DiGraph,
    condition: Condition,
    f: usize,
    rho: Option<usize>,
    budget: WorkBudget,
) -> Result<ConditionVerdict, ConditionError> {
    let rho = rho.unwrap_or(1);
    match condition {
        Condition::OneReach => check_1_reach(g, f, rho, budget),
        Condition::TwoReach => check_2_reach(g, f, rho, budget),
        Condition::ThreeReach => check_3_reach(g, f, rho, budget),
        Condition::S => check_condition_s(g, f, budget),
        Condition::A => check_condition_a(g, f, budget),
    }
}
