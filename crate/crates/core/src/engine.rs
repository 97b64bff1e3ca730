//! Slot-by-slot simulation loop with a clairvoyant per-slot oracle.
//!
//! At the start of slot `t` the policy places using slots `< t` only; the
//! slot's requests are then served against that placement and against the
//! exact-knapsack optimum for the same requests. The gap is the slot's
//! regret increment.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ContentId};
use crate::policy::knapsack::{exact_knapsack, KnapsackItem};
use crate::policy::{HybridConfig, Placement, Policy, PolicyKind, SlotView};
use crate::popularity::{AllocationEstimate, AllocationEstimator, RequestHistory, SlotMix};
use crate::workload::{Request, RequestTrace};
use crate::{Error, Result};

/// Result of serving one slot's requests from a placement.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SlotOutcome {
    pub hits: u64,
    pub total: u64,
    /// Requests per content in this slot.
    pub requests: BTreeMap<ContentId, u64>,
}

impl SlotOutcome {
    pub fn hit_ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }

    pub fn misses(&self) -> u64 {
        self.total - self.hits
    }

    /// Hits contributed by each cached item.
    pub fn hits_by_content<'a>(
        &'a self,
        placement: &'a Placement,
    ) -> impl Iterator<Item = (ContentId, u64)> + 'a {
        self.requests
            .iter()
            .filter(|(id, _)| placement.contains(**id))
            .map(|(&id, &c)| (id, c))
    }
}

pub fn slot_step(placement: &Placement, events: &[Request]) -> SlotOutcome {
    let mut outcome = SlotOutcome {
        total: events.len() as u64,
        ..SlotOutcome::default()
    };
    for e in events {
        *outcome.requests.entry(e.content).or_insert(0) += 1;
        if placement.contains(e.content) {
            outcome.hits += 1;
        }
    }
    outcome
}

/// Best placement for the slot's actual requests, with its hit ratio.
pub fn oracle_placement(
    events: &[Request],
    catalog: &Catalog,
    capacity: f64,
) -> Result<(Placement, f64)> {
    let mut counts: BTreeMap<ContentId, u64> = BTreeMap::new();
    for e in events {
        *counts.entry(e.content).or_insert(0) += 1;
    }
    let items = counts
        .iter()
        .map(|(&id, &c)| {
            Ok(KnapsackItem {
                id,
                value: c as f64,
                size: catalog.item(id)?.size,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let placement = exact_knapsack(&items, capacity)?;
    let ratio = slot_step(&placement, events).hit_ratio();
    Ok((placement, ratio))
}

/// Prefix sums of `max(0, oracle - achieved)`.
pub fn cumulative_regret(achieved: &[f64], oracle: &[f64]) -> Result<Vec<f64>> {
    if achieved.len() != oracle.len() {
        return Err(Error::LengthMismatch {
            left: achieved.len(),
            right: oracle.len(),
        });
    }
    let mut total = 0.0;
    Ok(achieved
        .iter()
        .zip(oracle)
        .map(|(a, o)| {
            total += (o - a).max(0.0);
            total
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub capacity: f64,
    pub hybrid: HybridConfig,
    pub allocation_window: usize,
    pub allocation_smoothing: f64,
    /// Demand split assumed before any request has been seen.
    pub initial_w_snm: f64,
    /// Opaque identifier of the experiment inputs, copied into the summary.
    pub config_hash: String,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            capacity: 40.0,
            hybrid: HybridConfig::default(),
            allocation_window: 10,
            allocation_smoothing: 0.3,
            initial_w_snm: 0.5,
            config_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub slot: u32,
    pub requests: u64,
    pub hits: u64,
    pub hit_ratio: f64,
    pub oracle_hit_ratio: f64,
    pub regret_increment: f64,
    /// Demand share given to the transient library when placing this slot.
    pub w_snm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub config_hash: String,
    pub capacity: f64,
    pub slots: u32,
    pub total_requests: u64,
    pub total_hits: u64,
    /// Hits over all requests of the run.
    pub mean_hit_ratio: f64,
    /// Average of the per-slot hit ratios.
    pub mean_slot_hit_ratio: f64,
    pub final_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub per_slot: Vec<SlotMetrics>,
    pub cumulative_regret: Vec<f64>,
    pub summary: RunSummary,
}

impl RunMetrics {
    /// Average regret increment over slots `from..=to` (1-based, inclusive).
    pub fn mean_regret_between(&self, from: u32, to: u32) -> f64 {
        let slice: Vec<f64> = self
            .per_slot
            .iter()
            .filter(|m| m.slot >= from && m.slot <= to)
            .map(|m| m.regret_increment)
            .collect();
        if slice.is_empty() {
            0.0
        } else {
            slice.iter().sum::<f64>() / slice.len() as f64
        }
    }
}

pub fn run_simulation(
    catalog: &Catalog,
    trace: &RequestTrace,
    policy: &str,
    config: &SimulationConfig,
    seed: u64,
) -> Result<RunMetrics> {
    let kind: PolicyKind = policy.parse()?;
    let mut policy = kind.build(catalog, &config.hybrid, seed)?;
    run_with_policy(catalog, trace, policy.as_mut(), config, seed)
}

pub fn run_with_policy(
    catalog: &Catalog,
    trace: &RequestTrace,
    policy: &mut dyn Policy,
    config: &SimulationConfig,
    seed: u64,
) -> Result<RunMetrics> {
    if !(config.capacity.is_finite() && config.capacity >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "capacity",
            reason: "must be finite and non-negative",
        });
    }
    trace.validate_against(catalog)?;
    let prior = AllocationEstimate::from_snm_share(config.initial_w_snm)?;
    let mut estimator =
        AllocationEstimator::new(config.allocation_window, config.allocation_smoothing)?
            .with_prior(prior);
    let mut history = RequestHistory::new(catalog);

    let horizon = trace.horizon();
    let mut per_slot = Vec::with_capacity(horizon as usize);
    for slot in 1..=horizon {
        let events = trace.slot(slot);
        let allocation = estimator.current().unwrap_or(prior);
        let view = SlotView {
            slot,
            capacity: config.capacity,
            catalog,
            allocation,
            history: &history,
        };
        let placement = policy.place(&view)?;
        debug_assert!(placement.used_capacity() <= config.capacity);
        let outcome = slot_step(&placement, events);
        let (_, oracle_ratio) = oracle_placement(events, catalog, config.capacity)?;
        policy.observe(&view, &placement, &outcome)?;

        history.record(slot, events)?;
        match estimator.record(SlotMix::of(catalog, events)) {
            Ok(_) | Err(Error::EmptyWindow) => {}
            Err(e) => return Err(e),
        }

        let hit_ratio = outcome.hit_ratio();
        per_slot.push(SlotMetrics {
            slot,
            requests: outcome.total,
            hits: outcome.hits,
            hit_ratio,
            oracle_hit_ratio: oracle_ratio,
            regret_increment: (oracle_ratio - hit_ratio).max(0.0),
            w_snm: allocation.w_snm,
        });
    }

    let achieved: Vec<f64> = per_slot.iter().map(|m| m.hit_ratio).collect();
    let oracle: Vec<f64> = per_slot.iter().map(|m| m.oracle_hit_ratio).collect();
    let cumulative = cumulative_regret(&achieved, &oracle)?;

    let total_requests: u64 = per_slot.iter().map(|m| m.requests).sum();
    let total_hits: u64 = per_slot.iter().map(|m| m.hits).sum();
    let summary = RunSummary {
        policy: policy.name().into(),
        seed,
        config_hash: config.config_hash.clone(),
        capacity: config.capacity,
        slots: horizon,
        total_requests,
        total_hits,
        mean_hit_ratio: if total_requests == 0 {
            0.0
        } else {
            total_hits as f64 / total_requests as f64
        },
        mean_slot_hit_ratio: achieved.iter().sum::<f64>() / achieved.len().max(1) as f64,
        final_regret: cumulative.last().copied().unwrap_or(0.0),
    };
    Ok(RunMetrics {
        per_slot,
        cumulative_regret: cumulative,
        summary,
    })
}

/// Counts requests by regime over a whole trace.
pub fn trace_mix(catalog: &Catalog, trace: &RequestTrace) -> SlotMix {
    SlotMix::of(catalog, trace.events())
}

/// Request share of the transient library within a trace.
pub fn snm_share(catalog: &Catalog, trace: &RequestTrace) -> f64 {
    let mix = trace_mix(catalog, trace);
    let total = mix.snm + mix.irm;
    if total == 0 {
        0.0
    } else {
        mix.snm as f64 / total as f64
    }
}
