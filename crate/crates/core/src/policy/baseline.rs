use alloc::vec::Vec;

use core::sync::atomic::{AtomicBool, Ordering};

use log::{debug, warn};
use rand::seq::SliceRandom;

use crate::catalog::{Catalog, ContentId};
use crate::policy::knapsack::{greedy_knapsack, KnapsackItem};
use crate::policy::{Placement, Policy, SlotView};
use crate::popularity::{PopularitySnapshot, RegimeFilter};
use crate::rng::SimRng;
use crate::Result;

/// Shuffles the whole catalog and admits items in that order while they fit.
pub fn random_place(catalog: &Catalog, capacity: f64, rng: &mut SimRng) -> Placement {
    let mut order: Vec<ContentId> = catalog.ids().collect();
    order.shuffle(rng);
    let mut placement = Placement::empty(capacity);
    for id in order {
        if let Some(item) = catalog.get(id) {
            placement.insert(id, item.size);
        }
    }
    placement
}

static WARNED_EMPTY_HISTORY: AtomicBool = AtomicBool::new(false);

/// Caches the most requested items so far, regardless of regime.
pub fn popular_place(
    catalog: &Catalog,
    history: &PopularitySnapshot,
    capacity: f64,
    rng: &mut SimRng,
) -> Result<Placement> {
    if history.is_empty() {
        // Every run starts this way, so only the first occurrence is a warning.
        if WARNED_EMPTY_HISTORY.swap(true, Ordering::Relaxed) {
            debug!("no request history yet; popular placement falls back to random");
        } else {
            warn!("no request history yet; popular placement falls back to random");
        }
        return Ok(random_place(catalog, capacity, rng));
    }
    let items: Vec<KnapsackItem> = catalog
        .items()
        .iter()
        .map(|i| KnapsackItem {
            id: i.id,
            value: history.frequency(i.id),
            size: i.size,
        })
        .collect();
    greedy_knapsack(&items, capacity)
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: SimRng,
}

impl RandomPolicy {
    pub fn new(rng: SimRng) -> Self {
        RandomPolicy { rng }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn place(&mut self, view: &SlotView<'_>) -> Result<Placement> {
        Ok(random_place(view.catalog, view.capacity, &mut self.rng))
    }
}

#[derive(Debug, Clone)]
pub struct PopularPolicy {
    rng: SimRng,
}

impl PopularPolicy {
    pub fn new(rng: SimRng) -> Self {
        PopularPolicy { rng }
    }
}

impl Policy for PopularPolicy {
    fn name(&self) -> &str {
        "popular"
    }

    fn place(&mut self, view: &SlotView<'_>) -> Result<Placement> {
        let snapshot = view.history.snapshot(view.catalog, RegimeFilter::All);
        popular_place(view.catalog, &snapshot, view.capacity, &mut self.rng)
    }
}
