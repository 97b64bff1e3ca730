//! Cache placement: objectives, knapsack solvers and the three policies.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ContentId, Regime};
use crate::engine::SlotOutcome;
use crate::popularity::{AllocationEstimate, PopularitySnapshot, RequestHistory};
use crate::rng::{stream_rng, Stream};
use crate::workload::ZipfModel;
use crate::{Error, Result};

mod baseline;
pub mod hybrid;
pub mod knapsack;

pub use baseline::{popular_place, random_place, PopularPolicy, RandomPolicy};
pub use hybrid::{hybrid_select, ucb_score, ArmState, BanditState, HybridConfig, HybridPolicy};
pub use knapsack::{exact_knapsack, greedy_knapsack, KnapsackItem};

/// A 0/1 cache decision under a capacity budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    cached: BTreeSet<ContentId>,
    used_capacity: f64,
    capacity: f64,
}

impl Placement {
    pub fn empty(capacity: f64) -> Self {
        Placement {
            cached: BTreeSet::new(),
            used_capacity: 0.0,
            capacity,
        }
    }

    pub fn fits(&self, size: f64) -> bool {
        self.used_capacity + size <= self.capacity
    }

    /// Admits `id` if it is not cached yet and fits; returns whether it was admitted.
    pub fn insert(&mut self, id: ContentId, size: f64) -> bool {
        if self.cached.contains(&id) || !self.fits(size) {
            return false;
        }
        self.cached.insert(id);
        self.used_capacity += size;
        true
    }

    pub fn contains(&self, id: ContentId) -> bool {
        self.cached.contains(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ContentId> + '_ {
        self.cached.iter().copied()
    }

    pub fn cached(&self) -> &BTreeSet<ContentId> {
        &self.cached
    }

    pub fn len(&self) -> usize {
        self.cached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cached.is_empty()
    }

    pub fn used_capacity(&self) -> f64 {
        self.used_capacity
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }
}

/// Stationary hit ratio: Zipf mass of the cached IRM items.
pub fn hit_ratio_irm(placement: &Placement, catalog: &Catalog, zipf: &ZipfModel) -> Result<f64> {
    placement.ids().try_fold(0.0, |acc, id| {
        let rank = catalog.irm_rank(id)?;
        Ok(acc + zipf.probability(rank))
    })
}

/// Transient hit ratio: empirical frequency mass of the cached SNM items.
pub fn hit_ratio_snm(
    placement: &Placement,
    catalog: &Catalog,
    popularity: &PopularitySnapshot,
) -> Result<f64> {
    placement.ids().try_fold(0.0, |acc, id| {
        if catalog.item(id)?.regime != Regime::Snm {
            return Err(Error::WrongRegime(id));
        }
        Ok(acc + popularity.frequency(id))
    })
}

pub fn hit_ratio_total(p_irm: f64, p_snm: f64, alloc: &AllocationEstimate) -> f64 {
    alloc.w_irm * p_irm + alloc.w_snm * p_snm
}

/// What a policy may look at when placing for `slot`: only slots before it.
#[derive(Debug, Clone, Copy)]
pub struct SlotView<'a> {
    pub slot: u32,
    pub capacity: f64,
    pub catalog: &'a Catalog,
    pub allocation: AllocationEstimate,
    pub history: &'a RequestHistory,
}

pub trait Policy {
    fn name(&self) -> &str;

    fn place(&mut self, view: &SlotView<'_>) -> Result<Placement>;

    /// Feedback after the slot has been served.
    fn observe(
        &mut self,
        _view: &SlotView<'_>,
        _placement: &Placement,
        _outcome: &SlotOutcome,
    ) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Hybrid,
    Popular,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Hybrid, PolicyKind::Popular, PolicyKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Hybrid => "hybrid",
            PolicyKind::Popular => "popular",
            PolicyKind::Random => "random",
        }
    }

    pub fn build(
        self,
        catalog: &Catalog,
        hybrid: &HybridConfig,
        seed: u64,
    ) -> Result<Box<dyn Policy>> {
        let rng = stream_rng(seed, Stream::Policy);
        Ok(match self {
            PolicyKind::Hybrid => Box::new(HybridPolicy::new(catalog, hybrid.clone())?),
            PolicyKind::Popular => Box::new(PopularPolicy::new(rng)),
            PolicyKind::Random => Box::new(RandomPolicy::new(rng)),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(PolicyKind::Hybrid),
            "popular" => Ok(PolicyKind::Popular),
            "random" => Ok(PolicyKind::Random),
            other => Err(Error::UnknownPolicy(other.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog, CatalogConfig};
    use alloc::collections::BTreeMap;

    fn catalog() -> Catalog {
        let config = CatalogConfig {
            library_size: 10,
            w_snm: 0.7,
            ..CatalogConfig::default()
        };
        // ids 1..=3 stationary, 4..=10 transient
        build_catalog(&config, 4).unwrap()
    }

    #[test]
    fn placement_respects_capacity() {
        let mut p = Placement::empty(2.0);
        assert!(p.insert(ContentId(1), 1.0));
        assert!(!p.insert(ContentId(1), 1.0));
        assert!(!p.insert(ContentId(2), 1.5));
        assert!(p.insert(ContentId(3), 1.0));
        assert!(!p.insert(ContentId(4), 0.5));
        assert_eq!(p.used_capacity(), 2.0);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn irm_hit_ratio_examples() {
        let cat = catalog();
        let zipf = ZipfModel::new(3, 1.0).unwrap();
        let mut all = Placement::empty(10.0);
        for id in 1..=3 {
            all.insert(ContentId(id), 1.0);
        }
        assert!((hit_ratio_irm(&all, &cat, &zipf).unwrap() - 1.0).abs() < 1e-12);
        let mut top = Placement::empty(10.0);
        top.insert(ContentId(1), 1.0);
        assert!((hit_ratio_irm(&top, &cat, &zipf).unwrap() - 0.5455).abs() < 1e-4);
        assert_eq!(
            hit_ratio_irm(&Placement::empty(1.0), &cat, &zipf).unwrap(),
            0.0
        );
        let mut wrong = Placement::empty(1.0);
        wrong.insert(ContentId(5), 1.0);
        assert_eq!(
            hit_ratio_irm(&wrong, &cat, &zipf),
            Err(Error::WrongRegime(ContentId(5)))
        );
    }

    #[test]
    fn snm_hit_ratio_examples() {
        let cat = catalog();
        let mut freq = BTreeMap::new();
        freq.insert(ContentId(4), 0.75);
        freq.insert(ContentId(5), 0.25);
        let snap = PopularitySnapshot {
            slot: 1,
            frequencies: freq,
        };
        let mut p = Placement::empty(5.0);
        p.insert(ContentId(4), 1.0);
        assert_eq!(hit_ratio_snm(&p, &cat, &snap).unwrap(), 0.75);
        p.insert(ContentId(5), 1.0);
        assert_eq!(hit_ratio_snm(&p, &cat, &snap).unwrap(), 1.0);
        let mut unseen = Placement::empty(5.0);
        unseen.insert(ContentId(6), 1.0);
        assert_eq!(hit_ratio_snm(&unseen, &cat, &snap).unwrap(), 0.0);
        let mut wrong = Placement::empty(5.0);
        wrong.insert(ContentId(1), 1.0);
        assert_eq!(
            hit_ratio_snm(&wrong, &cat, &snap),
            Err(Error::WrongRegime(ContentId(1)))
        );
    }

    #[test]
    fn total_hit_ratio_examples() {
        let alloc = AllocationEstimate::from_snm_share(0.8).unwrap();
        assert!((hit_ratio_total(1.0, 0.5, &alloc) - 0.6).abs() < 1e-12);
        let snm_only = AllocationEstimate::from_snm_share(1.0).unwrap();
        assert_eq!(hit_ratio_total(0.3, 0.7, &snm_only), 0.7);
        for w in [0.0, 0.25, 0.8, 1.0] {
            let a = AllocationEstimate::from_snm_share(w).unwrap();
            assert!((hit_ratio_total(0.4, 0.4, &a) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.as_str().parse::<PolicyKind>().unwrap(), kind);
        }
        assert_eq!(
            "lru".parse::<PolicyKind>(),
            Err(Error::UnknownPolicy("lru".into()))
        );
    }
}
