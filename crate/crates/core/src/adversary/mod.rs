//! Byzantine strategies and the scripted executions of the necessity
//! arguments.

mod attacks;
mod strategies;

pub use attacks::{
    attack_small_intersection_async, attack_small_source_sync, attack_two_sources, find_small_intersection,
    find_small_source, find_two_sources, AttackError, AttackOptions, DEMO_EPSILON,
};
pub use strategies::{builtin_strategies, AsyncStrategy, PersonaScript, Strategy, SyncStrategy};
