//! File formats, scenarios, sweeps and campaigns on top of `byzlab-core`.

pub mod format;
pub mod recipe;
pub mod scenario;
pub mod sweep;

pub use byzlab_core;
