//! Online popularity estimation.
//!
//! Tracks what has been requested so far and turns it into the two inputs
//! placement needs: per-content empirical frequencies and the split of
//! demand between the stationary and transient libraries.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ContentId, Regime};
use crate::workload::Request;
use crate::{Error, Result};

/// Share of demand attributed to each library. `w_irm + w_snm == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationEstimate {
    pub w_irm: f64,
    pub w_snm: f64,
}

impl AllocationEstimate {
    pub fn from_snm_share(w_snm: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w_snm) {
            return Err(Error::InvalidParameter {
                name: "w_snm",
                reason: "must lie in [0, 1]",
            });
        }
        Ok(AllocationEstimate {
            w_irm: 1.0 - w_snm,
            w_snm,
        })
    }
}

/// Request counts of one slot by library.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotMix {
    pub snm: u64,
    pub irm: u64,
}

impl SlotMix {
    pub fn of(catalog: &Catalog, requests: &[Request]) -> Self {
        let mut mix = SlotMix::default();
        for r in requests {
            match catalog.get(r.content).map(|i| i.regime) {
                Some(Regime::Snm) => mix.snm += 1,
                Some(Regime::Irm) => mix.irm += 1,
                None => {}
            }
        }
        mix
    }
}

/// Windowed demand ratio, exponentially smoothed against `prior`:
/// `w = smoothing * prior + (1 - smoothing) * raw`.
pub fn estimate_allocation(
    window: &[SlotMix],
    smoothing: f64,
    prior: Option<AllocationEstimate>,
) -> Result<AllocationEstimate> {
    if !(0.0..=1.0).contains(&smoothing) {
        return Err(Error::InvalidParameter {
            name: "smoothing",
            reason: "must lie in [0, 1]",
        });
    }
    let snm: u64 = window.iter().map(|m| m.snm).sum();
    let irm: u64 = window.iter().map(|m| m.irm).sum();
    if snm + irm == 0 {
        return Err(Error::EmptyWindow);
    }
    let raw = snm as f64 / (snm + irm) as f64;
    let w_snm = match prior {
        Some(p) if smoothing == 1.0 => p.w_snm,
        Some(p) => (smoothing * p.w_snm + (1.0 - smoothing) * raw).clamp(0.0, 1.0),
        None => raw,
    };
    AllocationEstimate::from_snm_share(w_snm)
}

/// Stateful estimator over a sliding window of slots.
#[derive(Debug, Clone)]
pub struct AllocationEstimator {
    window: usize,
    smoothing: f64,
    history: VecDeque<SlotMix>,
    current: Option<AllocationEstimate>,
}

impl AllocationEstimator {
    pub fn new(window: usize, smoothing: f64) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter {
                name: "allocation_window",
                reason: "must be at least 1",
            });
        }
        if !(0.0..=1.0).contains(&smoothing) {
            return Err(Error::InvalidParameter {
                name: "smoothing",
                reason: "must lie in [0, 1]",
            });
        }
        Ok(AllocationEstimator {
            window,
            smoothing,
            history: VecDeque::with_capacity(window),
            current: None,
        })
    }

    pub fn with_prior(mut self, prior: AllocationEstimate) -> Self {
        self.current = Some(prior);
        self
    }

    /// Appends a slot and refreshes the estimate. An all-empty window leaves
    /// the previous estimate in place and reports `EmptyWindow`.
    pub fn record(&mut self, mix: SlotMix) -> Result<AllocationEstimate> {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(mix);
        let window = self.history.make_contiguous();
        let next = estimate_allocation(window, self.smoothing, self.current)?;
        self.current = Some(next);
        Ok(next)
    }

    pub fn current(&self) -> Option<AllocationEstimate> {
        self.current
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeFilter {
    All,
    Only(Regime),
}

impl RegimeFilter {
    fn admits(self, regime: Option<Regime>) -> bool {
        match self {
            RegimeFilter::All => true,
            RegimeFilter::Only(r) => regime == Some(r),
        }
    }
}

/// Empirical request frequencies; sums to one unless empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopularitySnapshot {
    pub slot: u32,
    pub frequencies: BTreeMap<ContentId, f64>,
}

impl PopularitySnapshot {
    pub fn from_counts(slot: u32, counts: &BTreeMap<ContentId, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let frequencies = if total == 0 {
            BTreeMap::new()
        } else {
            counts
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(|(&id, &c)| (id, c as f64 / total as f64))
                .collect()
        };
        PopularitySnapshot { slot, frequencies }
    }

    pub fn frequency(&self, id: ContentId) -> f64 {
        self.frequencies.get(&id).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

pub fn empirical_popularity(
    catalog: &Catalog,
    requests: &[Request],
    filter: RegimeFilter,
    slot: u32,
) -> PopularitySnapshot {
    let mut counts = BTreeMap::new();
    for r in requests {
        let regime = catalog.get(r.content).map(|i| i.regime);
        if filter.admits(regime) {
            *counts.entry(r.content).or_insert(0u64) += 1;
        }
    }
    PopularitySnapshot::from_counts(slot, &counts)
}

/// Everything observed up to the end of the last recorded slot.
#[derive(Debug, Clone)]
pub struct RequestHistory {
    counts: Vec<u64>,
    last_seen: Vec<u32>,
    total: u64,
    slots: u32,
}

impl RequestHistory {
    pub fn new(catalog: &Catalog) -> Self {
        RequestHistory {
            counts: vec![0; catalog.len()],
            last_seen: vec![0; catalog.len()],
            total: 0,
            slots: 0,
        }
    }

    pub fn record(&mut self, slot: u32, requests: &[Request]) -> Result<()> {
        for r in requests {
            let i = r.content.index();
            if r.content.0 == 0 || i >= self.counts.len() {
                return Err(Error::UnknownContent(r.content));
            }
            self.counts[i] += 1;
            self.last_seen[i] = self.last_seen[i].max(slot);
        }
        self.total += requests.len() as u64;
        self.slots = self.slots.max(slot);
        Ok(())
    }

    pub fn count(&self, id: ContentId) -> u64 {
        self.counts.get(id.index()).copied().unwrap_or(0)
    }

    /// Latest slot in which `id` was requested, if ever.
    pub fn last_seen(&self, id: ContentId) -> Option<u32> {
        match self.last_seen.get(id.index()) {
            Some(&0) | None => None,
            Some(&t) => Some(t),
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Cumulative frequencies over all recorded slots.
    pub fn snapshot(&self, catalog: &Catalog, filter: RegimeFilter) -> PopularitySnapshot {
        let counts: BTreeMap<ContentId, u64> = catalog
            .items()
            .iter()
            .filter(|i| filter.admits(Some(i.regime)))
            .map(|i| (i.id, self.count(i.id)))
            .collect();
        PopularitySnapshot::from_counts(self.slots, &counts)
    }
}
