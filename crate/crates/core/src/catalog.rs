//! Content catalog: items, fine-grained features and the IRM/SNM split.
//!
//! Items `1..=n_irm` belong to the stationary (IRM) library and their id is
//! also their Zipf rank. Items `n_irm + 1..=F` are transient (SNM) and carry
//! an arrival slot, a lifespan and a total request volume.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, Stream};
use crate::workload::ParetoVolume;
use crate::{Error, Result};

/// Number of fine-grained features in the default schema:
/// size, bandwidth, value, category weight.
pub const FEATURE_DIM: usize = 4;

pub const DEFAULT_ROLES: [FeatureRole; FEATURE_DIM] = [
    FeatureRole::Cost,
    FeatureRole::Cost,
    FeatureRole::Benefit,
    FeatureRole::Benefit,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentId(pub u32);

impl ContentId {
    /// Zero-based position in the catalog.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        ContentId(index as u32 + 1)
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "IRM")]
    Irm,
    #[serde(rename = "SNM")]
    Snm,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Irm => "IRM",
            Regime::Snm => "SNM",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Regime {
    type Err = ();

    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        match s {
            "IRM" | "irm" => Ok(Regime::Irm),
            "SNM" | "snm" => Ok(Regime::Snm),
            _ => Err(()),
        }
    }
}

/// Lifecycle of a transient item: active on `[arrival, arrival + lifespan)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnmDynamics {
    pub arrival: u32,
    pub lifespan: u32,
    pub volume: f64,
}

impl SnmDynamics {
    pub fn is_active(&self, slot: u32) -> bool {
        slot >= self.arrival && slot - self.arrival < self.lifespan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentItem {
    pub id: ContentId,
    /// Capacity units occupied when cached.
    pub size: f64,
    pub regime: Regime,
    /// Normalized features, each in `[0, 1]`.
    pub features: Vec<f64>,
    pub snm: Option<SnmDynamics>,
}

impl ContentItem {
    pub fn new(
        id: ContentId,
        size: f64,
        regime: Regime,
        features: Vec<f64>,
        snm: Option<SnmDynamics>,
    ) -> Result<Self> {
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::InvalidParameter {
                name: "size",
                reason: "must be positive and finite",
            });
        }
        if features.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter {
                name: "features",
                reason: "components must lie in [0, 1]",
            });
        }
        match (regime, &snm) {
            (Regime::Irm, None) => {}
            (Regime::Snm, Some(d)) => {
                if d.lifespan == 0 || !(d.volume.is_finite() && d.volume > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "snm_dynamics",
                        reason: "lifespan and volume must be positive",
                    });
                }
            }
            _ => {
                return Err(Error::InvalidParameter {
                    name: "snm_dynamics",
                    reason: "present if and only if the regime is SNM",
                })
            }
        }
        Ok(ContentItem {
            id,
            size,
            regime,
            features,
            snm,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Catalog {
    items: Vec<ContentItem>,
    n_irm: usize,
    n_snm: usize,
}

impl Catalog {
    /// Items must be listed in id order with ids `1..=len`.
    pub fn new(items: Vec<ContentItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        for (i, item) in items.iter().enumerate() {
            if item.id != ContentId::from_index(i) {
                return Err(Error::InvalidParameter {
                    name: "id",
                    reason: "ids must be dense and ordered starting at 1",
                });
            }
        }
        let n_irm = items.iter().filter(|i| i.regime == Regime::Irm).count();
        let n_snm = items.len() - n_irm;
        Ok(Catalog {
            items,
            n_irm,
            n_snm,
        })
    }

    pub fn items(&self) -> &[ContentItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_irm(&self) -> usize {
        self.n_irm
    }

    pub fn n_snm(&self) -> usize {
        self.n_snm
    }

    pub fn get(&self, id: ContentId) -> Option<&ContentItem> {
        if id.0 == 0 {
            return None;
        }
        self.items.get(id.index())
    }

    pub fn item(&self, id: ContentId) -> Result<&ContentItem> {
        self.get(id).ok_or(Error::UnknownContent(id))
    }

    pub fn contains(&self, id: ContentId) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = ContentId> + '_ {
        self.items.iter().map(|i| i.id)
    }

    pub fn ids_in(&self, regime: Regime) -> impl Iterator<Item = ContentId> + '_ {
        self.items
            .iter()
            .filter(move |i| i.regime == regime)
            .map(|i| i.id)
    }

    pub fn total_size(&self) -> f64 {
        self.items.iter().map(|i| i.size).sum()
    }

    /// Zipf rank (1-based) of an IRM item: its position among IRM items in id order.
    pub fn irm_rank(&self, id: ContentId) -> Result<usize> {
        let item = self.item(id)?;
        if item.regime != Regime::Irm {
            return Err(Error::WrongRegime(id));
        }
        Ok(self.items[..id.index()]
            .iter()
            .filter(|i| i.regime == Regime::Irm)
            .count()
            + 1)
    }
}

/// Linear map of each raw component onto `[0, 1]`, clamped.
pub fn normalize_features(raw: &[f64], ranges: &[(f64, f64)]) -> Result<Vec<f64>> {
    if raw.len() != ranges.len() {
        return Err(Error::FeatureArity {
            expected: ranges.len(),
            got: raw.len(),
        });
    }
    raw.iter()
        .zip(ranges)
        .enumerate()
        .map(|(index, (&x, &(lo, hi)))| {
            if hi <= lo {
                return Err(Error::RangeDegenerate { index, value: lo });
            }
            Ok(((x - lo) / (hi - lo)).clamp(0.0, 1.0))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureRole {
    /// Larger values make an item less attractive to cache.
    Cost,
    Benefit,
}

/// Collapses a normalized feature vector into a scalar in `[floor, 1]`:
/// the mean of the benefit components and the complemented cost components.
pub fn feature_influence(features: &[f64], roles: &[FeatureRole], floor: f64) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    if features.len() != roles.len() {
        return Err(Error::FeatureArity {
            expected: roles.len(),
            got: features.len(),
        });
    }
    if !(floor > 0.0 && floor <= 0.1) {
        return Err(Error::InvalidParameter {
            name: "floor",
            reason: "must lie in (0, 0.1]",
        });
    }
    let sum: f64 = features
        .iter()
        .zip(roles)
        .map(|(&x, role)| match role {
            FeatureRole::Cost => 1.0 - x,
            FeatureRole::Benefit => x,
        })
        .sum();
    Ok((sum / features.len() as f64).max(floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SizeLaw {
    /// Every item occupies one capacity unit.
    Unit,
    /// Integer sizes drawn uniformly from `min..=max`.
    UniformInt { min: u32, max: u32 },
}

/// Ranges for the synthetic raw features. Each raw value is drawn uniformly
/// from its range and then normalized against the same range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLaw {
    pub size_mb: (f64, f64),
    pub bandwidth_mbps: (f64, f64),
    pub value: (f64, f64),
    /// Benefit weight of each content category (film, series, music, clip, ...).
    pub category_weights: Vec<f64>,
}

impl Default for FeatureLaw {
    fn default() -> Self {
        FeatureLaw {
            size_mb: (5.0, 4000.0),
            bandwidth_mbps: (0.5, 25.0),
            value: (1.0, 10.0),
            category_weights: alloc::vec![0.9, 0.7, 0.5, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub library_size: usize,
    pub w_snm: f64,
    /// Arrival slots are drawn from `1..=horizon`.
    pub horizon: u32,
    pub size_law: SizeLaw,
    pub feature_law: FeatureLaw,
    pub lifespan: (u32, u32),
    pub volume: ParetoVolume,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            library_size: 150,
            w_snm: 0.8,
            horizon: 600,
            size_law: SizeLaw::Unit,
            feature_law: FeatureLaw::default(),
            lifespan: (20, 80),
            volume: ParetoVolume {
                beta: 2.0,
                n_min: 10.0,
            },
        }
    }
}

impl CatalogConfig {
    pub fn n_snm(&self) -> usize {
        libm::round(self.w_snm * self.library_size as f64) as usize
    }

    fn validate(&self) -> Result<()> {
        if self.library_size < 2 {
            return Err(Error::LibraryTooSmall(self.library_size));
        }
        if !(0.0..=1.0).contains(&self.w_snm) {
            return Err(Error::InvalidParameter {
                name: "w_snm",
                reason: "must lie in [0, 1]",
            });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be at least 1",
            });
        }
        if self.lifespan.0 == 0 || self.lifespan.1 < self.lifespan.0 {
            return Err(Error::InvalidParameter {
                name: "lifespan",
                reason: "need 1 <= min <= max",
            });
        }
        if let SizeLaw::UniformInt { min, max } = self.size_law {
            if min == 0 || max < min {
                return Err(Error::InvalidParameter {
                    name: "size_law",
                    reason: "need 1 <= min <= max",
                });
            }
        }
        let law = &self.feature_law;
        if law.category_weights.is_empty()
            || law
                .category_weights
                .iter()
                .any(|w| !(0.0..=1.0).contains(w))
        {
            return Err(Error::InvalidParameter {
                name: "category_weights",
                reason: "need at least one weight, all in [0, 1]",
            });
        }
        ParetoVolume::new(self.volume.beta, self.volume.n_min)?;
        Ok(())
    }
}

/// Builds a synthetic catalog. Deterministic in `(config, seed)`.
pub fn build_catalog(config: &CatalogConfig, seed: u64) -> Result<Catalog> {
    config.validate()?;
    let mut rng = stream_rng(seed, Stream::Catalog);
    let n_snm = config.n_snm();
    let n_irm = config.library_size - n_snm;
    let law = &config.feature_law;

    let mut items = Vec::with_capacity(config.library_size);
    for index in 0..config.library_size {
        let id = ContentId::from_index(index);
        let regime = if index < n_irm {
            Regime::Irm
        } else {
            Regime::Snm
        };

        let (size, size_feature) = match config.size_law {
            SizeLaw::UniformInt { min, max } if max > min => {
                let s = rng.random_range(min..=max);
                (
                    s as f64,
                    normalize_features(&[s as f64], &[(min as f64, max as f64)])?[0],
                )
            }
            SizeLaw::UniformInt { min, .. } => {
                let mb = rng.random_range(law.size_mb.0..=law.size_mb.1);
                (min as f64, normalize_features(&[mb], &[law.size_mb])?[0])
            }
            SizeLaw::Unit => {
                let mb = rng.random_range(law.size_mb.0..=law.size_mb.1);
                (1.0, normalize_features(&[mb], &[law.size_mb])?[0])
            }
        };
        let raw = [
            rng.random_range(law.bandwidth_mbps.0..=law.bandwidth_mbps.1),
            rng.random_range(law.value.0..=law.value.1),
            law.category_weights[rng.random_range(0..law.category_weights.len())],
        ];
        let rest = normalize_features(&raw, &[law.bandwidth_mbps, law.value, (0.0, 1.0)])?;
        let mut features = Vec::with_capacity(FEATURE_DIM);
        features.push(size_feature);
        features.extend(rest);

        let snm = match regime {
            Regime::Irm => None,
            Regime::Snm => {
                let arrival = rng.random_range(1..=config.horizon);
                let lifespan = rng.random_range(config.lifespan.0..=config.lifespan.1);
                let volume = config.volume.sample(rng.random::<f64>())?;
                Some(SnmDynamics {
                    arrival,
                    lifespan,
                    volume,
                })
            }
        };
        items.push(ContentItem::new(id, size, regime, features, snm)?);
    }
    Catalog::new(items)
}
