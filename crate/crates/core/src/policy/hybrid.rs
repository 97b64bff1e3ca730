//! Hybrid placement: popularity ranking for the stationary library and a
//! feature-weighted UCB bandit for transient content.
//!
//! Each slot the cache is split by the estimated demand mix. The transient
//! share first takes every candidate that has never been cached (one
//! exploratory pull each), then the remaining candidates by decreasing
//!
//! ```text
//! index(f) = mean(f) + sqrt(beta * max(B(f), floor) * x(f) * ln t / pulls(f))
//! ```
//!
//! where `B = A * r` is the last normalized reward and `x` the feature
//! influence of the item. The stationary share is filled by observed
//! request counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{feature_influence, Catalog, ContentId, FeatureRole, Regime, DEFAULT_ROLES};
use crate::engine::SlotOutcome;
use crate::policy::{Placement, Policy, SlotView};
use crate::popularity::AllocationEstimate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Exploration constant.
    pub beta: f64,
    /// Lower bound applied to the stored reward weight inside the index.
    pub weight_floor: f64,
    pub influence_floor: f64,
    /// A transient item is a candidate if it was requested in any of the
    /// last `candidate_window` slots.
    pub candidate_window: u32,
    /// Lend capacity one library leaves unused to the other one.
    pub share_spill: bool,
    pub roles: Vec<FeatureRole>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            beta: 2.0,
            weight_floor: 0.01,
            influence_floor: 0.01,
            candidate_window: 1,
            share_spill: true,
            roles: DEFAULT_ROLES.to_vec(),
        }
    }
}

/// Learning state of one transient item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub pulls: u64,
    pub mean_reward: f64,
    /// `r`: last observed reward over the slot maximum.
    pub reward_weight: f64,
    /// `A`: whether the item has been acted on.
    pub action_flag: bool,
    /// `B = A * r`.
    pub weighted_reward: f64,
    pub influence: f64,
}

impl ArmState {
    fn new(influence: f64) -> Self {
        ArmState {
            pulls: 0,
            mean_reward: 0.0,
            reward_weight: 0.0,
            action_flag: false,
            weighted_reward: 0.0,
            influence,
        }
    }
}

/// `mean + sqrt(beta * weight * influence * ln_t / pulls)`.
pub fn ucb_score(mean: f64, weight: f64, influence: f64, beta: f64, ln_t: f64, pulls: u64) -> f64 {
    mean + libm::sqrt(beta * weight * influence * ln_t / pulls as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    arms: BTreeMap<ContentId, ArmState>,
    beta: f64,
    weight_floor: f64,
    clock: u32,
    cached: BTreeSet<ContentId>,
}

impl BanditState {
    pub fn new(catalog: &Catalog, config: &HybridConfig) -> Result<Self> {
        if !(config.beta.is_finite() && config.beta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must be finite and non-negative",
            });
        }
        if !(config.weight_floor > 0.0 && config.weight_floor <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "weight_floor",
                reason: "must lie in (0, 1]",
            });
        }
        let arms = catalog
            .items()
            .iter()
            .filter(|i| i.regime == Regime::Snm)
            .map(|i| {
                let x = feature_influence(&i.features, &config.roles, config.influence_floor)?;
                Ok((i.id, ArmState::new(x)))
            })
            .collect::<Result<_>>()?;
        Ok(BanditState {
            arms,
            beta: config.beta,
            weight_floor: config.weight_floor,
            clock: 0,
            cached: BTreeSet::new(),
        })
    }

    pub fn arm(&self, f: ContentId) -> Option<&ArmState> {
        self.arms.get(&f)
    }

    pub fn arm_mut(&mut self, f: ContentId) -> Option<&mut ArmState> {
        self.arms.get_mut(&f)
    }

    pub fn arms(&self) -> impl Iterator<Item = (ContentId, &ArmState)> {
        self.arms.iter().map(|(&id, arm)| (id, arm))
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    /// Transient items placed by the last call to [`hybrid_select`].
    pub fn cached(&self) -> &BTreeSet<ContentId> {
        &self.cached
    }

    pub fn ucb_index(&self, f: ContentId, t: u32) -> Result<f64> {
        let arm = self.arms.get(&f).ok_or(Error::UnknownContent(f))?;
        if arm.pulls == 0 {
            return Err(Error::ColdStart(f));
        }
        let weight = arm.weighted_reward.max(self.weight_floor);
        let ln_t = libm::log(f64::from(t.max(1)));
        Ok(ucb_score(
            arm.mean_reward,
            weight,
            arm.influence,
            self.beta,
            ln_t,
            arm.pulls,
        ))
    }

    /// Folds one slot's observation for a cached item into its state.
    /// `observed` is the item's share of the slot's transient requests and
    /// `slot_max` the largest such share among cached items.
    pub fn update(&mut self, f: ContentId, observed: f64, slot_max: f64) -> Result<()> {
        if !self.cached.contains(&f) {
            return Err(Error::NotCached(f));
        }
        if !(observed >= 0.0 && slot_max >= observed) {
            return Err(Error::InvalidParameter {
                name: "observed",
                reason: "need 0 <= observed <= slot_max",
            });
        }
        let arm = self.arms.get_mut(&f).ok_or(Error::UnknownContent(f))?;
        arm.reward_weight = if slot_max > 0.0 {
            observed / slot_max
        } else {
            0.0
        };
        arm.action_flag = true;
        arm.weighted_reward = f64::from(u8::from(arm.action_flag)) * arm.reward_weight;
        let previous = arm.pulls;
        arm.pulls += 1;
        arm.mean_reward = (arm.mean_reward * previous as f64 + observed) / arm.pulls as f64;
        Ok(())
    }
}

/// Capacity reserved for the stationary library: `floor(w_irm * C)`.
pub fn irm_share(alloc: &AllocationEstimate, capacity: f64) -> f64 {
    libm::floor(alloc.w_irm * capacity)
}

/// Builds one slot's placement. Transient candidates never cached before go
/// first in id order, then the rest by decreasing UCB index; the stationary
/// share follows `irm_ranking`. Ties go to the lower id throughout.
///
/// With `spill`, capacity that one library cannot use (too few candidates or
/// ranked items) is handed to the other one, so the cache is only left
/// partly empty when neither side has anything left to admit.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_select(
    state: &mut BanditState,
    catalog: &Catalog,
    candidates: &[ContentId],
    irm_ranking: &[ContentId],
    alloc: &AllocationEstimate,
    capacity: f64,
    t: u32,
    spill: bool,
) -> Result<Placement> {
    let irm_budget = irm_share(alloc, capacity).max(0.0);
    let snm_budget = capacity - irm_budget;

    let mut cold = Vec::new();
    let mut warm = Vec::new();
    for &f in candidates {
        let arm = state.arms.get(&f).ok_or(Error::WrongRegime(f))?;
        if arm.pulls == 0 {
            cold.push(f);
        } else {
            warm.push((f, state.ucb_index(f, t)?));
        }
    }
    cold.sort_unstable();
    cold.dedup();
    warm.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    warm.dedup_by_key(|w| w.0);
    let snm_order: Vec<ContentId> = cold
        .into_iter()
        .chain(warm.into_iter().map(|(f, _)| f))
        .collect();
    for &f in irm_ranking {
        if catalog.item(f)?.regime != Regime::Irm {
            return Err(Error::WrongRegime(f));
        }
    }

    let fill = |budget: f64, order: &[ContentId]| -> Result<Placement> {
        let mut side = Placement::empty(budget);
        for &f in order {
            side.insert(f, catalog.item(f)?.size);
        }
        Ok(side)
    };

    let mut snm_side = fill(snm_budget, &snm_order)?;
    let irm_side = if spill {
        fill(capacity - snm_side.used_capacity(), irm_ranking)?
    } else {
        fill(irm_budget, irm_ranking)?
    };
    if spill && irm_side.used_capacity() < irm_budget {
        snm_side = fill(capacity - irm_side.used_capacity(), &snm_order)?;
    }

    let mut placement = Placement::empty(capacity);
    for f in snm_side.ids().chain(irm_side.ids()) {
        placement.insert(f, catalog.item(f)?.size);
    }
    state.cached = snm_side.cached().clone();
    state.clock = t;
    Ok(placement)
}

pub fn hybrid_update(
    state: &mut BanditState,
    f: ContentId,
    observed: f64,
    slot_max: f64,
) -> Result<()> {
    state.update(f, observed, slot_max)
}

#[derive(Debug, Clone)]
pub struct HybridPolicy {
    state: BanditState,
    config: HybridConfig,
}

impl HybridPolicy {
    pub fn new(catalog: &Catalog, config: HybridConfig) -> Result<Self> {
        Ok(HybridPolicy {
            state: BanditState::new(catalog, &config)?,
            config,
        })
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }

    /// Transient items requested within the candidate window before `view.slot`.
    pub fn candidates(&self, view: &SlotView<'_>) -> Vec<ContentId> {
        let window = self.config.candidate_window;
        view.catalog
            .ids_in(Regime::Snm)
            .filter(|&f| {
                view.history
                    .last_seen(f)
                    .is_some_and(|seen| seen < view.slot && seen + window >= view.slot)
            })
            .collect()
    }

    /// Stationary items by decreasing observed request count.
    pub fn irm_ranking(&self, view: &SlotView<'_>) -> Vec<ContentId> {
        let mut ranking: Vec<ContentId> = view.catalog.ids_in(Regime::Irm).collect();
        ranking.sort_by(|a, b| {
            view.history
                .count(*b)
                .cmp(&view.history.count(*a))
                .then(a.cmp(b))
        });
        ranking
    }
}

impl Policy for HybridPolicy {
    fn name(&self) -> &str {
        "hybrid"
    }

    fn place(&mut self, view: &SlotView<'_>) -> Result<Placement> {
        let candidates = self.candidates(view);
        let ranking = self.irm_ranking(view);
        hybrid_select(
            &mut self.state,
            view.catalog,
            &candidates,
            &ranking,
            &view.allocation,
            view.capacity,
            view.slot,
            self.config.share_spill,
        )
    }

    fn observe(
        &mut self,
        view: &SlotView<'_>,
        _placement: &Placement,
        outcome: &SlotOutcome,
    ) -> Result<()> {
        let snm_total: u64 = outcome
            .requests
            .iter()
            .filter(|(id, _)| {
                view.catalog
                    .get(**id)
                    .is_some_and(|i| i.regime == Regime::Snm)
            })
            .map(|(_, &c)| c)
            .sum();
        let share = |f: &ContentId| {
            if snm_total == 0 {
                0.0
            } else {
                outcome.requests.get(f).copied().unwrap_or(0) as f64 / snm_total as f64
            }
        };
        let observed: Vec<(ContentId, f64)> =
            self.state.cached.iter().map(|f| (*f, share(f))).collect();
        let slot_max = observed.iter().map(|o| o.1).fold(0.0, f64::max);
        for (f, p) in observed {
            self.state.update(f, p, slot_max)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog, CatalogConfig};
    use proptest::prelude::*;

    fn catalog() -> Catalog {
        // ids 1..=4 stationary, 5..=20 transient
        build_catalog(
            &CatalogConfig {
                library_size: 20,
                ..CatalogConfig::default()
            },
            3,
        )
        .unwrap()
    }

    fn state(cat: &Catalog) -> BanditState {
        BanditState::new(cat, &HybridConfig::default()).unwrap()
    }

    fn alloc(w_snm: f64) -> AllocationEstimate {
        AllocationEstimate::from_snm_share(w_snm).unwrap()
    }

    fn force_cached(state: &mut BanditState, ids: &[u32]) {
        state.cached = ids.iter().map(|&i| ContentId(i)).collect();
    }

    #[test]
    fn index_hand_evaluation() {
        // beta * W * x = 2 * 1 * 0.5 = 1, ln t = 1, one pull: 0.3 + 1
        assert!((ucb_score(0.3, 1.0, 0.5, 2.0, 1.0, 1) - 1.3).abs() < 1e-12);
        assert_eq!(ucb_score(0.3, 1.0, 0.5, 2.0, 0.0, 1), 0.3);
        let far = ucb_score(0.3, 1.0, 0.5, 2.0, 1.0, 100_000_000);
        assert!((far - 0.3).abs() < 1e-3);
    }

    #[test]
    fn index_through_state() {
        let cat = catalog();
        let mut s = state(&cat);
        let f = ContentId(5);
        assert_eq!(s.ucb_index(f, 3), Err(Error::ColdStart(f)));
        force_cached(&mut s, &[5]);
        s.update(f, 0.3, 0.3).unwrap();
        // t = 1 contributes no bonus
        assert_eq!(s.ucb_index(f, 1).unwrap(), 0.3);
        let arm = *s.arm(f).unwrap();
        let expected = 0.3 + libm::sqrt(2.0 * 1.0 * arm.influence * libm::log(5.0));
        assert!((s.ucb_index(f, 5).unwrap() - expected).abs() < 1e-12);
        assert_eq!(
            s.ucb_index(ContentId(1), 5),
            Err(Error::UnknownContent(ContentId(1)))
        );
    }

    #[test]
    fn weight_floor_keeps_bonus_positive() {
        let cat = catalog();
        let mut s = state(&cat);
        force_cached(&mut s, &[6]);
        s.update(ContentId(6), 0.0, 0.0).unwrap();
        let arm = *s.arm(ContentId(6)).unwrap();
        assert_eq!(arm.weighted_reward, 0.0);
        let expected = libm::sqrt(2.0 * 0.01 * arm.influence * libm::log(10.0));
        assert!((s.ucb_index(ContentId(6), 10).unwrap() - expected).abs() < 1e-12);
        assert!(expected > 0.0);
    }

    #[test]
    fn update_examples() {
        let cat = catalog();
        let mut s = state(&cat);
        let f = ContentId(7);
        {
            let arm = s.arm_mut(f).unwrap();
            arm.pulls = 4;
            arm.mean_reward = 0.4;
        }
        force_cached(&mut s, &[7]);
        s.update(f, 0.9, 0.9).unwrap();
        let arm = *s.arm(f).unwrap();
        assert_eq!(arm.pulls, 5);
        assert!((arm.mean_reward - 0.5).abs() < 1e-12);
        assert_eq!(arm.reward_weight, 1.0);
        assert!(arm.action_flag);
        assert_eq!(arm.weighted_reward, 1.0);

        s.update(f, 0.0, 0.0).unwrap();
        let arm = *s.arm(f).unwrap();
        assert_eq!(arm.reward_weight, 0.0);
        assert!(arm.mean_reward < 0.5);

        assert_eq!(
            s.update(ContentId(8), 0.1, 0.2),
            Err(Error::NotCached(ContentId(8)))
        );
        assert!(s.update(f, 0.5, 0.2).is_err());
    }

    #[test]
    fn cold_items_first_lower_id_wins() {
        let cat = catalog();
        let mut s = state(&cat);
        // w_irm = 0.5 of capacity 2: one unit per side
        let p = hybrid_select(
            &mut s,
            &cat,
            &[ContentId(9), ContentId(6)],
            &[ContentId(1)],
            &alloc(0.5),
            2.0,
            1,
            false,
        )
        .unwrap();
        assert_eq!(p.ids().map(|i| i.0).collect::<Vec<_>>(), [1, 6]);
        assert_eq!(s.cached().iter().map(|i| i.0).collect::<Vec<_>>(), [6]);
    }

    #[test]
    fn cold_beats_warm() {
        let cat = catalog();
        let mut s = state(&cat);
        force_cached(&mut s, &[5]);
        s.update(ContentId(5), 1.0, 1.0).unwrap();
        let p = hybrid_select(
            &mut s,
            &cat,
            &[ContentId(5), ContentId(10)],
            &[],
            &alloc(1.0),
            1.0,
            2,
            false,
        )
        .unwrap();
        assert_eq!(p.ids().map(|i| i.0).collect::<Vec<_>>(), [10]);
    }

    #[test]
    fn warm_items_follow_the_index() {
        let cat = catalog();
        let mut s = state(&cat);
        let warm = [5u32, 6, 7, 8];
        force_cached(&mut s, &warm);
        for (i, &f) in warm.iter().enumerate() {
            s.update(ContentId(f), 0.1 * (i + 1) as f64, 0.4).unwrap();
        }
        let ids: Vec<ContentId> = warm.iter().map(|&i| ContentId(i)).collect();
        let t = 7;
        let mut by_index: Vec<(ContentId, f64)> = ids
            .iter()
            .map(|&f| (f, s.ucb_index(f, t).unwrap()))
            .collect();
        by_index.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let p = hybrid_select(&mut s, &cat, &ids, &[], &alloc(1.0), 2.0, t, false).unwrap();
        let mut expected: Vec<ContentId> = by_index[..2].iter().map(|w| w.0).collect();
        expected.sort();
        assert_eq!(p.ids().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn zero_snm_share_is_pure_popularity() {
        let cat = catalog();
        let mut s = state(&cat);
        let ranking = [ContentId(3), ContentId(1), ContentId(4), ContentId(2)];
        let p = hybrid_select(
            &mut s,
            &cat,
            &[ContentId(5)],
            &ranking,
            &alloc(0.0),
            2.0,
            4,
            false,
        )
        .unwrap();
        assert_eq!(p.ids().map(|i| i.0).collect::<Vec<_>>(), [1, 3]);
        assert!(s.cached().is_empty());
    }

    #[test]
    fn spill_lends_idle_capacity() {
        let cat = catalog();
        let ranking = [ContentId(1), ContentId(2), ContentId(3), ContentId(4)];
        // SNM share 4 of 6 but only one candidate: strict leaves 3 units idle
        let strict = hybrid_select(
            &mut state(&cat),
            &cat,
            &[ContentId(5)],
            &ranking,
            &alloc(0.7),
            6.0,
            2,
            false,
        )
        .unwrap();
        assert_eq!(strict.ids().map(|i| i.0).collect::<Vec<_>>(), [1, 5]);
        let lent = hybrid_select(
            &mut state(&cat),
            &cat,
            &[ContentId(5)],
            &ranking,
            &alloc(0.7),
            6.0,
            2,
            true,
        )
        .unwrap();
        assert_eq!(lent.ids().map(|i| i.0).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);

        // the other direction: IRM share 3 but only one ranked item
        let cands: Vec<ContentId> = (5..=9).map(ContentId).collect();
        let mut s = state(&cat);
        let lent = hybrid_select(
            &mut s,
            &cat,
            &cands,
            &ranking[..1],
            &alloc(0.5),
            6.0,
            2,
            true,
        )
        .unwrap();
        assert_eq!(
            lent.ids().map(|i| i.0).collect::<Vec<_>>(),
            [1, 5, 6, 7, 8, 9]
        );
        assert_eq!(s.cached().len(), 5);
    }

    #[test]
    fn rejects_wrong_regime_inputs() {
        let cat = catalog();
        let mut s = state(&cat);
        assert!(hybrid_select(
            &mut s,
            &cat,
            &[ContentId(1)],
            &[],
            &alloc(0.5),
            2.0,
            1,
            false
        )
        .is_err());
        assert!(hybrid_select(
            &mut s,
            &cat,
            &[],
            &[ContentId(6)],
            &alloc(0.5),
            2.0,
            1,
            false
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn running_mean_is_the_arithmetic_mean(obs in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let cat = catalog();
            let mut s = state(&cat);
            force_cached(&mut s, &[5]);
            for &o in &obs {
                s.update(ContentId(5), o, 1.0).unwrap();
            }
            let arm = s.arm(ContentId(5)).unwrap();
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            prop_assert_eq!(arm.pulls, obs.len() as u64);
            prop_assert!((arm.mean_reward - mean).abs() < 1e-12);
        }

        #[test]
        fn index_decreases_with_pulls(mean in 0.0f64..1.0, w in 0.01f64..1.0, x in 0.01f64..1.0, t in 2u32..1000, n in 1u64..10_000) {
            let ln_t = libm::log(f64::from(t));
            prop_assert!(ucb_score(mean, w, x, 2.0, ln_t, n + 1) < ucb_score(mean, w, x, 2.0, ln_t, n));
        }

        #[test]
        fn equal_bonus_means_mean_ordering(means in proptest::collection::vec(0.0f64..1.0, 2..10), t in 2u32..500) {
            let ln_t = libm::log(f64::from(t));
            let scores: Vec<f64> = means.iter().map(|&m| ucb_score(m, 0.5, 0.5, 2.0, ln_t, 3)).collect();
            for i in 0..means.len() {
                for j in 0..means.len() {
                    if means[i] < means[j] {
                        prop_assert!(scores[i] <= scores[j]);
                    }
                }
            }
        }

        #[test]
        fn selection_never_exceeds_capacity(
            w in 0.0f64..=1.0,
            cap in 0u32..25,
            cands in proptest::collection::btree_set(5u32..=20, 0..16),
            spill in any::<bool>(),
        ) {
            let cat = catalog();
            let mut s = state(&cat);
            let cands: Vec<ContentId> = cands.into_iter().map(ContentId).collect();
            let ranking: Vec<ContentId> = (1..=4).map(ContentId).collect();
            let p = hybrid_select(&mut s, &cat, &cands, &ranking, &alloc(w), f64::from(cap), 3, spill).unwrap();
            prop_assert!(p.used_capacity() <= f64::from(cap));
        }
    }
}
