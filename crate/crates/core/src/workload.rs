//! Request workload: Zipf popularity for the stationary library and
//! shot-noise (Pareto volume, rectangular rate pulse) for transient items.

use alloc::vec::Vec;

use log::debug;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ContentId, ContentItem, Regime};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Zipf probabilities `f^-delta / sum_j j^-delta` for ranks `1..=n`.
pub fn zipf_pmf(n: usize, delta: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyLibrary);
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: "must be finite and non-negative",
        });
    }
    let weights: Vec<f64> = (1..=n).map(|f| libm::pow(f as f64, -delta)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZipfModel {
    n: usize,
    delta: f64,
    pmf: Vec<f64>,
}

impl ZipfModel {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        Ok(ZipfModel {
            n,
            delta,
            pmf: zipf_pmf(n, delta)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of the item at 1-based `rank`; zero outside `1..=n`.
    pub fn probability(&self, rank: usize) -> f64 {
        rank.checked_sub(1)
            .and_then(|i| self.pmf.get(i))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Pareto law of a transient item's total request volume:
/// density `beta * n_min^beta * v^-(beta + 1)` on `v >= n_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoVolume {
    pub beta: f64,
    pub n_min: f64,
}

impl ParetoVolume {
    pub fn new(beta: f64, n_min: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 1.0) {
            return Err(Error::InvalidParameter {
                name: "pareto_beta",
                reason: "must exceed 1",
            });
        }
        if !(n_min.is_finite() && n_min > 0.0) {
            return Err(Error::InvalidParameter {
                name: "pareto_n_min",
                reason: "must be positive",
            });
        }
        Ok(ParetoVolume { beta, n_min })
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::BadUniform(u));
        }
        Ok(self.n_min * libm::pow(1.0 - u, -1.0 / self.beta))
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v < self.n_min {
            0.0
        } else {
            1.0 - libm::pow(self.n_min / v, self.beta)
        }
    }

    pub fn mean(&self) -> f64 {
        self.beta * self.n_min / (self.beta - 1.0)
    }
}

pub fn sample_pareto_volume(model: &ParetoVolume, u: f64) -> Result<f64> {
    model.sample(u)
}

/// Request rate of a transient item at `slot`: its volume spread evenly over
/// the half-open window `[arrival, arrival + lifespan)`.
pub fn snm_rate(item: &ContentItem, slot: u32) -> Result<f64> {
    let dynamics = item.snm.as_ref().ok_or(Error::WrongRegime(item.id))?;
    Ok(if dynamics.is_active(slot) {
        dynamics.volume / dynamics.lifespan as f64
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Request {
    pub slot: u32,
    pub content: ContentId,
}

/// Time-ordered request events over slots `1..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestTrace {
    horizon: u32,
    events: Vec<Request>,
    // slot_start[t - 1] .. slot_start[t] indexes the events of slot t
    slot_start: Vec<usize>,
}

impl RequestTrace {
    pub fn new(horizon: u32, events: Vec<Request>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be at least 1",
            });
        }
        if events.iter().any(|e| e.slot == 0 || e.slot > horizon) {
            return Err(Error::InvalidParameter {
                name: "slot",
                reason: "every event slot must lie in [1, horizon]",
            });
        }
        if events.windows(2).any(|w| w[0].slot > w[1].slot) {
            return Err(Error::InvalidParameter {
                name: "events",
                reason: "events must be sorted by slot",
            });
        }
        let slot_start = (1..=horizon + 1)
            .map(|t| events.partition_point(|e| e.slot < t))
            .collect();
        Ok(RequestTrace {
            horizon,
            events,
            slot_start,
        })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn events(&self) -> &[Request] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events of one slot; empty outside `1..=horizon`.
    pub fn slot(&self, t: u32) -> &[Request] {
        if t == 0 || t > self.horizon {
            return &[];
        }
        let t = t as usize;
        &self.events[self.slot_start[t - 1]..self.slot_start[t]]
    }

    /// Events of slots `from..=to`.
    pub fn window(&self, from: u32, to: u32) -> &[Request] {
        let from = from.max(1) as usize;
        let to = (to.min(self.horizon)) as usize;
        if from > to {
            return &[];
        }
        &self.events[self.slot_start[from - 1]..self.slot_start[to]]
    }

    pub fn validate_against(&self, catalog: &Catalog) -> Result<()> {
        match self.events.iter().find(|e| !catalog.contains(e.content)) {
            Some(e) => Err(Error::UnknownContent(e.content)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub horizon: u32,
    pub requests_per_slot: u32,
    pub w_snm: f64,
    pub zipf_delta: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            horizon: 600,
            requests_per_slot: 100,
            w_snm: 0.8,
            zipf_delta: 0.8,
        }
    }
}

/// Bookkeeping from trace generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TraceStats {
    /// Requests that drew the transient class.
    pub snm_draws: u64,
    /// Of those, requests redirected because no transient item was active
    /// (or, with an all-transient catalog, spread uniformly instead).
    pub snm_fallbacks: u64,
    pub total: u64,
}

impl TraceStats {
    /// Expected transient share once fallbacks are accounted for.
    pub fn adjusted_snm_share(&self, w_snm: f64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        w_snm - self.snm_fallbacks as f64 / self.total as f64
    }
}

/// Generates `requests_per_slot` requests in each slot. Each request is
/// transient with probability `w_snm`; transient requests pick an active
/// item in proportion to [`snm_rate`], stationary requests follow the Zipf
/// law over IRM ranks. When no transient item is active the request falls
/// back to the stationary library.
pub fn generate_trace(
    catalog: &Catalog,
    config: &TraceConfig,
    seed: u64,
) -> Result<(RequestTrace, TraceStats)> {
    if catalog.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if config.horizon == 0 || config.requests_per_slot == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon/requests_per_slot",
            reason: "must be at least 1",
        });
    }
    if !(0.0..=1.0).contains(&config.w_snm) {
        return Err(Error::InvalidParameter {
            name: "w_snm",
            reason: "must lie in [0, 1]",
        });
    }
    let mut rng = stream_rng(seed, Stream::Trace);

    let irm_ids: Vec<ContentId> = catalog.ids_in(Regime::Irm).collect();
    let snm_items: Vec<&ContentItem> = catalog
        .items()
        .iter()
        .filter(|i| i.regime == Regime::Snm)
        .collect();
    let irm_dist = if irm_ids.is_empty() {
        None
    } else {
        let pmf = zipf_pmf(irm_ids.len(), config.zipf_delta)?;
        Some(WeightedIndex::new(&pmf).map_err(|_| Error::BadInput("zipf weights"))?)
    };

    let per_slot = config.requests_per_slot as usize;
    let mut events = Vec::with_capacity(per_slot * config.horizon as usize);
    let mut stats = TraceStats::default();
    let mut active: Vec<ContentId> = Vec::new();
    let mut rates: Vec<f64> = Vec::new();

    for slot in 1..=config.horizon {
        active.clear();
        rates.clear();
        for item in &snm_items {
            let rate = snm_rate(item, slot)?;
            if rate > 0.0 {
                active.push(item.id);
                rates.push(rate);
            }
        }
        let snm_dist = if active.is_empty() {
            None
        } else {
            Some(WeightedIndex::new(&rates).map_err(|_| Error::BadInput("snm rates"))?)
        };

        let mut slot_fallbacks = 0u64;
        for _ in 0..per_slot {
            let wants_snm = rng.random::<f64>() < config.w_snm;
            let content = if wants_snm {
                stats.snm_draws += 1;
                match &snm_dist {
                    Some(d) => active[d.sample(&mut rng)],
                    None => {
                        slot_fallbacks += 1;
                        match &irm_dist {
                            Some(d) => irm_ids[d.sample(&mut rng)],
                            None => snm_items[rng.random_range(0..snm_items.len())].id,
                        }
                    }
                }
            } else {
                match &irm_dist {
                    Some(d) => irm_ids[d.sample(&mut rng)],
                    None => match &snm_dist {
                        Some(d) => active[d.sample(&mut rng)],
                        None => snm_items[rng.random_range(0..snm_items.len())].id,
                    },
                }
            };
            events.push(Request { slot, content });
        }
        if slot_fallbacks > 0 {
            debug!("slot {slot}: {slot_fallbacks} transient requests fell back (no active item)");
        }
        stats.snm_fallbacks += slot_fallbacks;
    }
    stats.total = events.len() as u64;
    Ok((RequestTrace::new(config.horizon, events)?, stats))
}
