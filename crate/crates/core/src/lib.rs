//! Time-slotted edge caching simulator core.
//!
//! The library splits a content catalog into a stationary part, whose
//! requests follow a Zipf law, and a transient part, whose items live for a
//! limited number of slots with a Pareto-distributed request volume. A
//! cache of fixed capacity is re-planned at every slot boundary by one of
//! three policies:
//!
//! - `hybrid`: reserves capacity per regime from the observed request mix,
//!   fills the stationary share by learned popularity and the transient share
//!   with a feature-weighted UCB bandit;
//! - `popular`: caches the historically most requested items;
//! - `random`: caches a uniformly shuffled selection.
//!
//! Every slot is also solved clairvoyantly with an exact knapsack so that
//! runs report cumulative regret alongside hit ratio.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiment
//! sweeps and the command line live in the `edgecache` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod catalog;
pub mod engine;
mod error;
pub mod policy;
pub mod popularity;
pub mod rng;
pub mod workload;

pub use catalog::{Catalog, CatalogConfig, ContentId, ContentItem, Regime, SnmDynamics};
pub use engine::{run_simulation, RunMetrics, RunSummary, SimulationConfig};
pub use error::{Error, Result};
pub use policy::{Placement, PolicyKind};
pub use popularity::{AllocationEstimate, AllocationEstimator, PopularitySnapshot};
pub use workload::{RequestTrace, TraceConfig};
