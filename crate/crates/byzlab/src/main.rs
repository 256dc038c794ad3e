use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use byzlab::format;
use byzlab::recipe::{work_budget, GraphRecipe};
use byzlab::scenario::{range_csv, RunFlags, ScenarioFile};
use byzlab::sweep::{self, CorpusGraph};
use byzlab_core::adversary::{
    attack_small_intersection_async, attack_small_source_sync, attack_two_sources, find_small_intersection,
    find_small_source, find_two_sources, AttackOptions,
};
use byzlab_core::conditions::{check, Condition, ConditionError, WorkBudget};
use byzlab_core::report::{ExecutionReport, Mode};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Directed-graph conditions and authenticated Byzantine consensus lab.
#[derive(Parser)]
#[command(name = "byzlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sync,
    Async,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sync => Mode::Sync,
            ModeArg::Async => Mode::Async,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Script {
    TwoSources,
    SmallSourceSync,
    SmallIntersectionAsync,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Equivalence,
    Chain,
    Lemmas,
    Campaign,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Complete,
    Cycle,
    Path,
    Random,
    WitnessSearch,
}

#[derive(Subcommand)]
enum Command {
    /// Check one condition; exit 0 if it holds, 1 if violated.
    Check {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        f: usize,
        /// 1-reach, 2-reach, 3-reach, S or A.
        #[arg(long, default_value = "S")]
        condition: String,
        #[arg(long)]
        rho: Option<usize>,
    },
    /// Run one scenario file; exit 0 iff every verdict and audit passes.
    Simulate {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        scenario: PathBuf,
        /// Keep the full execution trace with every message.
        #[arg(long)]
        trace: bool,
        /// Run even if the graph violates the protocol's condition.
        #[arg(long)]
        allow_violating: bool,
        /// Write the per-round range series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a scripted necessity attack on a violating graph.
    Attack {
        #[arg(long, value_enum)]
        script: Script,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        f: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Protocol attacked by `two-sources`.
        #[arg(long, value_enum, default_value = "sync")]
        mode: ModeArg,
        #[arg(long)]
        trace: bool,
    },
    /// Sweep a graph corpus or run a randomized campaign; exit 1 on any failure.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        /// Node count (exhaustive) or largest node count (random).
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        f: usize,
        /// Enumerate every digraph on `n` nodes.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "sync")]
        mode: ModeArg,
        #[arg(long)]
        trials: Option<u64>,
        /// Async campaign epsilons.
        #[arg(long, num_args = 1.., default_values_t = [0.25, 1.0 / 64.0, 1.0 / 1024.0])]
        epsilon: Vec<f64>,
        /// Also search separating graphs for the chain (f = 1).
        #[arg(long)]
        separators: bool,
    },
    /// Write a generated graph.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        /// Node count; the largest one tried for `witness-search` (default 4, or 8 when searching).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        f: usize,
        /// Search target for `witness-search`.
        #[arg(long, default_value = "small-intersection")]
        target: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type Failure = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    let budget = work_budget()?;
    match command {
        Command::Check { graph, f, condition, rho } => {
            let g = format::read(&graph)?;
            let c = Condition::parse(&condition).ok_or_else(|| format!("unknown condition `{condition}`"))?;
            let verdict = check(&g, c, f, rho, budget)?;
            print_json(&verdict)?;
            Ok(exit(verdict.holds))
        }
        Command::Simulate { mode, scenario, trace, allow_violating, csv } => {
            let text = std::fs::read_to_string(&scenario).map_err(|e| format!("{}: {e}", scenario.display()))?;
            let base = scenario.parent().unwrap_or(Path::new("."));
            let report = ScenarioFile::parse(&text)?.run(mode.into(), base, RunFlags { allow_violating, trace })?;
            if let Some(path) = csv {
                std::fs::write(&path, range_csv(&report)?).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            print_json(&report)?;
            Ok(exit(report.pass))
        }
        Command::Attack { script, graph, f, seed, mode, trace } => {
            let g = format::read(&graph)?;
            let report = attack(script, &g, f, seed, mode.into())?;
            print_json(&if trace { report } else { report.without_trace() })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { kind, n, f, exhaustive, samples, seed, mode, trials, epsilon, separators } => {
            sweep_command(kind, n, f, exhaustive, samples, seed, mode.into(), trials, &epsilon, separators, budget)
        }
        Command::Gen { kind, n, p, seed, f, target, json, out } => {
            let n = n.unwrap_or(if matches!(kind, GenKind::WitnessSearch) { 8 } else { 4 });
            let recipe = match kind {
                GenKind::Complete => GraphRecipe::Complete { n },
                GenKind::Cycle => GraphRecipe::Cycle { n },
                GenKind::Path => GraphRecipe::Path { n },
                GenKind::Random => GraphRecipe::Random { n, p, seed },
                GenKind::WitnessSearch => GraphRecipe::WitnessSearch { target, seed, n, f },
            };
            let g = recipe.build()?;
            let text = if json { format::to_json(&g) + "\n" } else { format::to_text(&g) };
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?,
                None => std::io::stdout().lock().write_all(text.as_bytes())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn attack(script: Script, g: &byzlab_core::graph::DiGraph, f: usize, seed: u64, mode: Mode) -> Result<ExecutionReport, Failure> {
    if f < 1 || f >= g.node_count() {
        return Err(ConditionError::InvalidParams { n: g.node_count(), f }.into());
    }
    let opts = AttackOptions { mint_seed: seed, schedule_seed: seed, ..AttackOptions::default() };
    Ok(match script {
        Script::TwoSources => {
            let (f_set, s0, s1) =
                find_two_sources(g, f).ok_or("every G_F has a unique source component; nothing to attack")?;
            attack_two_sources(g, f, f_set, s0, s1, mode, opts)?
        }
        Script::SmallSourceSync => {
            let f_set = find_small_source(g, f).ok_or("no F leaves a source component of at most f nodes")?;
            attack_small_source_sync(g, f, f_set, opts)?
        }
        Script::SmallIntersectionAsync => {
            let (f_set, f_prime) = find_small_intersection(g, f)
                .ok_or("no two large source components meet in at most f nodes")?;
            attack_small_intersection_async(g, f, f_set, f_prime, opts)?
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep_command(
    kind: SweepKind,
    n: usize,
    f: usize,
    exhaustive: bool,
    samples: usize,
    seed: u64,
    mode: Mode,
    trials: Option<u64>,
    epsilons: &[f64],
    separators: bool,
    budget: WorkBudget,
) -> Result<ExitCode, Failure> {
    let corpus = || -> Result<Vec<CorpusGraph>, Failure> {
        if f < 1 || n < f + 2 || n > 8 {
            return Err(format!("sweeps need f >= 1 and f + 2 <= n <= 8 (got n = {n}, f = {f})").into());
        }
        let size = if exhaustive { 1u64 << (n * (n - 1)) } else { samples as u64 };
        if size > budget.0 {
            return Err(ConditionError::BudgetExceeded { required: size, budget: budget.0 }.into());
        }
        Ok(if exhaustive { sweep::exhaustive_corpus(n, f) } else { sweep::random_corpus(samples, n, &[f], seed) })
    };
    match kind {
        SweepKind::Equivalence => {
            let s = sweep::equivalence_sweep(&corpus()?, budget);
            print_json(&s)?;
            Ok(exit(s.ok()))
        }
        SweepKind::Chain => {
            let s = sweep::chain_sweep(&corpus()?, budget);
            let found = separators.then(|| sweep::find_separators(8, seed, budget));
            let all_found = found.as_ref().is_none_or(|v| v.iter().all(|s| s.graph.is_some()));
            print_json(&serde_json::json!({ "chain": s, "separators": found }))?;
            Ok(exit(s.ok() && all_found))
        }
        SweepKind::Lemmas => {
            let s = sweep::lemma_sweep(&corpus()?);
            print_json(&s)?;
            Ok(exit(s.ok()))
        }
        SweepKind::Campaign => {
            if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return Err("epsilon must be positive".into());
            }
            let s = match mode {
                Mode::Sync => {
                    let graphs = sweep::sync_campaign_corpus(48, seed);
                    let trials = trials.unwrap_or(graphs.len() as u64 * 70);
                    sweep::sync_campaign(&graphs, trials, seed)
                }
                Mode::Async => {
                    let graphs = sweep::async_campaign_corpus(18, seed);
                    let trials = trials.unwrap_or(graphs.len() as u64 * 20 * epsilons.len() as u64);
                    sweep::async_campaign(&graphs, epsilons, trials, seed)
                }
            };
            print_json(&s)?;
            Ok(exit(s.ok()))
        }
    }
}
