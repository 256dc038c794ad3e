#![no_std]
extern crate alloc;

pub mod adversary;
pub mod asynchronous;
pub mod audit;
pub mod auth;
pub mod conditions;
pub mod graph;
pub mod report;
pub mod search;
pub mod sim;
pub mod sync;
