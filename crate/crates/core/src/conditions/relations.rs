use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    check, check_1_reach, check_2_reach, check_condition_a, check_condition_s, Condition,
    ConditionError, ConditionVerdict, WorkBudget,
};
use crate::graph::DiGraph;

/// Verdicts for both equivalent pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub f: usize,
    pub s: ConditionVerdict,
    pub one_reach: ConditionVerdict,
    pub a: ConditionVerdict,
    pub two_reach: ConditionVerdict,
}

/// Condition S against 1-reach(f+1) and Condition A against 2-reach(f+1).
/// A disagreement is reported as an error.
pub fn verify_equivalences(
    g: &DiGraph,
    f: usize,
    budget: WorkBudget,
) -> Result<EquivalenceReport, ConditionError> {
    let s = check_condition_s(g, f, budget)?;
    let one_reach = check_1_reach(g, f, f + 1, budget)?;
    if s.holds != one_reach.holds {
        return Err(ConditionError::EquivalenceViolation(format!(
            "{g:?}, f = {f}: Condition S {} but 1-reach({}) {}",
            s.holds,
            f + 1,
            one_reach.holds
        )));
    }
    let a = check_condition_a(g, f, budget)?;
    let two_reach = check_2_reach(g, f, f + 1, budget)?;
    if a.holds != two_reach.holds {
        return Err(ConditionError::EquivalenceViolation(format!(
            "{g:?}, f = {f}: Condition A {} but 2-reach({}) {}",
            a.holds,
            f + 1,
            two_reach.holds
        )));
    }
    Ok(EquivalenceReport { f, s, one_reach, a, two_reach })
}

/// The five reach conditions from weakest to strongest.
pub fn chain_links(f: usize) -> [(Condition, usize); 5] {
    [
        (Condition::OneReach, 1),
        (Condition::OneReach, f + 1),
        (Condition::TwoReach, 1),
        (Condition::TwoReach, f + 1),
        (Condition::ThreeReach, 1),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub f: usize,
    /// In the order of [`chain_links`].
    pub verdicts: Vec<ConditionVerdict>,
}

impl ChainReport {
    pub fn pattern(&self) -> [bool; 5] {
        let mut out = [false; 5];
        for (slot, v) in out.iter_mut().zip(&self.verdicts) {
            *slot = v.holds;
        }
        out
    }
}

/// Evaluates the chain and fails if a stronger condition holds while a
/// weaker one does not.
pub fn verify_implication_chain(
    g: &DiGraph,
    f: usize,
    budget: WorkBudget,
) -> Result<ChainReport, ConditionError> {
    let verdicts = chain_links(f)
        .iter()
        .map(|&(c, rho)| check(g, c, f, Some(rho), budget))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ChainReport { f, verdicts };
    let pattern = report.pattern();
    if let Some(i) = (1..5).find(|&i| pattern[i] && !pattern[i - 1]) {
        let links = chain_links(f);
        return Err(ConditionError::ChainViolation(format!(
            "{g:?}, f = {f}: {}(rho={}) holds but {}(rho={}) does not",
            links[i].0, links[i].1, links[i - 1].0, links[i - 1].1
        )));
    }
    Ok(report)
}
