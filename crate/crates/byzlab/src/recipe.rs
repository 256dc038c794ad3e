//! Graph recipes, witness fixtures and the work budget.

use std::path::PathBuf;

use byzlab_core::conditions::{WorkBudget, DEFAULT_WORK_BUDGET};
use byzlab_core::graph::DiGraph;
use byzlab_core::search;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{self, FormatError};

/// Environment variable overriding the enumeration budget.
pub const BUDGET_ENV: &str = "BYZLAB_WORK_BUDGET";

#[derive(Debug, Error)]
pub enum RecipeError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Graph(#[from] byzlab_core::graph::GraphError),
    #[error("no graph matching `{0}` found")]
    NotFound(String),
    #[error("unknown witness target `{0}`")]
    UnknownTarget(String),
    #[error("{BUDGET_ENV} must be a positive integer, got `{0}`")]
    Budget(String),
}

/// Budget from [`BUDGET_ENV`], falling back to the default.
pub fn work_budget() -> Result<WorkBudget, RecipeError> {
    match std::env::var(BUDGET_ENV) {
        Ok(raw) => match raw.trim().parse::<u64>() {
            Ok(b) if b > 0 => Ok(WorkBudget(b)),
            _ => Err(RecipeError::Budget(raw)),
        },
        Err(_) => Ok(WorkBudget(DEFAULT_WORK_BUDGET)),
    }
}

/// Searched witnesses kept as regression fixtures.
pub mod fixtures {
    use super::*;

    const SEPARATION: [&str; 4] = [
        include_str!("../fixtures/separation-0.txt"),
        include_str!("../fixtures/separation-1.txt"),
        include_str!("../fixtures/separation-2.txt"),
        include_str!("../fixtures/separation-3.txt"),
    ];

    /// A graph (f = 1) satisfying chain link `link` but not `link + 1`.
    pub fn separation(link: usize) -> DiGraph {
        format::parse_text(SEPARATION[link]).expect("fixture parses")
    }

    /// Unique, large source components, two of which share one node (f = 1).
    pub fn small_intersection() -> DiGraph {
        format::parse_text(include_str!("../fixtures/small-intersection.txt")).expect("fixture parses")
    }

    pub fn two_cycles() -> DiGraph {
        format::parse_text(include_str!("../fixtures/two-cycles.txt")).expect("fixture parses")
    }

    pub fn cycle3() -> DiGraph {
        format::parse_text(include_str!("../fixtures/cycle-3.txt")).expect("fixture parses")
    }
}

/// Targets understood by [`GraphRecipe::WitnessSearch`].
pub const WITNESS_TARGETS: [&str; 6] =
    ["separation-0", "separation-1", "separation-2", "separation-3", "small-intersection", "sparse-s"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphRecipe {
    Complete { n: usize },
    Cycle { n: usize },
    Path { n: usize },
    Random { n: usize, p: f64, seed: u64 },
    File { path: PathBuf },
    /// `separation-<i>`: satisfies chain link `i` but not `i + 1` (f = 1);
    /// `small-intersection`: violates only the intersection clause (f = 1);
    /// `sparse-s`: edge-minimal Condition-S graph on `n` nodes for `f`.
    WitnessSearch {
        target: String,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_f")]
        f: usize,
    },
}

fn default_n() -> usize {
    8
}

fn default_f() -> usize {
    1
}

const SEARCH_ATTEMPTS: usize = 200_000;

impl GraphRecipe {
    pub fn build(&self) -> Result<DiGraph, RecipeError> {
        Ok(match self {
            GraphRecipe::Complete { n } => DiGraph::complete(*n)?,
            GraphRecipe::Cycle { n } => DiGraph::cycle(*n)?,
            GraphRecipe::Path { n } => DiGraph::path(*n)?,
            GraphRecipe::Random { n, p, seed } => {
                DiGraph::new(*n, [])?;
                search::random_graph(*n, *p, *seed)
            }
            GraphRecipe::File { path } => format::read(path)?,
            GraphRecipe::WitnessSearch { target, seed, n, f } => {
                let found = match target.as_str() {
                    "small-intersection" => search::find_small_intersection_graph(*f, (*n).max(2 * f + 2), *seed, SEARCH_ATTEMPTS),
                    "sparse-s" => {
                        let budget = WorkBudget::default();
                        let holds = |g: &DiGraph| {
                            byzlab_core::conditions::check_condition_s(g, *f, budget).is_ok_and(|v| v.holds)
                        };
                        let g = DiGraph::complete(*n)?;
                        holds(&g).then(|| search::sparsify(&g, holds))
                    }
                    t => {
                        let link = t
                            .strip_prefix("separation-")
                            .and_then(|i| i.parse::<usize>().ok())
                            .filter(|&i| i < 4)
                            .ok_or_else(|| RecipeError::UnknownTarget(t.into()))?;
                        search::find_separation(link, *f, *n, *seed, SEARCH_ATTEMPTS)
                    }
                };
                found.ok_or_else(|| RecipeError::NotFound(target.clone()))?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use byzlab_core::adversary::find_small_intersection;
    use byzlab_core::conditions::{check_condition_a, Witness};
    use byzlab_core::search::chain_pattern;

    #[test]
    fn separation_fixtures_still_separate() {
        let b = WorkBudget::default();
        for link in 0..4 {
            let p = chain_pattern(&fixtures::separation(link), 1, b).unwrap();
            assert!(p[link] && !p[link + 1], "link {link}: {p:?}");
            assert!(p[..=link].iter().all(|&h| h) && p[link + 1..].iter().all(|&h| !h));
        }
    }

    #[test]
    fn search_rediscovers_fixtures() {
        for link in 0..4 {
            let recipe = GraphRecipe::WitnessSearch { target: format!("separation-{link}"), seed: 1, n: 8, f: 1 };
            assert_eq!(recipe.build().unwrap(), fixtures::separation(link));
        }
    }

    #[test]
    fn intersection_fixture_only_fails_intersection() {
        let g = fixtures::small_intersection();
        let v = check_condition_a(&g, 1, WorkBudget::default()).unwrap();
        assert!(matches!(v.witness, Some(Witness::SmallIntersection { .. })));
        assert!(find_small_intersection(&g, 1).is_some());
        let searched = GraphRecipe::WitnessSearch { target: "small-intersection".into(), seed: 0, n: 8, f: 1 };
        assert_eq!(searched.build().unwrap(), g);
    }

    #[test]
    fn recipes_build() {
        assert_eq!(GraphRecipe::Complete { n: 4 }.build().unwrap().edge_count(), 12);
        assert_eq!(GraphRecipe::Path { n: 4 }.build().unwrap().edge_count(), 3);
        let r: GraphRecipe = serde_json::from_str(r#"{"kind": "random", "n": 6, "p": 0.5, "seed": 9}"#).unwrap();
        assert_eq!(r.build().unwrap(), r.build().unwrap());
        let sparse = GraphRecipe::WitnessSearch { target: "sparse-s".into(), seed: 0, n: 5, f: 1 }.build().unwrap();
        assert!(sparse.edge_count() < 20);
        assert!(matches!(
            GraphRecipe::WitnessSearch { target: "nope".into(), seed: 0, n: 5, f: 1 }.build(),
            Err(RecipeError::UnknownTarget(_))
        ));
    }
}
