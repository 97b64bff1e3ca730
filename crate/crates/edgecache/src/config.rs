//! Experiment configuration.
//!
//! The file format is flat TOML: one `key = value` line per field of
//! [`ExperimentConfig`], no tables. Any field can be overridden from the
//! environment as `EDGECACHE_<FIELD>` (upper case), e.g.
//! `EDGECACHE_CAPACITY=30` or `EDGECACHE_SEEDS=1,2,3`. Precedence from low
//! to high: built-in defaults, config file, environment, command line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use edgecache_core::catalog::CatalogConfig;
use edgecache_core::workload::ParetoVolume;
use edgecache_core::{PolicyKind, SimulationConfig, TraceConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const ENV_PREFIX: &str = "EDGECACHE_";

/// First seed of the default replication list.
pub const DEFAULT_SEED_BASE: u64 = 1;
pub const DEFAULT_SEED_COUNT: u64 = 10;

pub const DEFAULT_LIBRARY_SIZES: [f64; 6] = [50.0, 70.0, 90.0, 110.0, 130.0, 150.0];
pub const DEFAULT_CAPACITIES: [f64; 4] = [10.0, 20.0, 30.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    LibrarySize,
    Capacity,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::LibrarySize => "library_size",
            Axis::Capacity => "capacity",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::LibrarySize => DEFAULT_LIBRARY_SIZES.to_vec(),
            Axis::Capacity => DEFAULT_CAPACITIES.to_vec(),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "library_size" => Ok(Axis::LibrarySize),
            "capacity" => Ok(Axis::Capacity),
            other => Err(CliError::config(
                "axis",
                format!("unknown axis `{other}`, expected library_size or capacity"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of slots T.
    pub horizon: u32,
    /// Catalog size F.
    pub library_size: usize,
    /// Cache capacity C in size units.
    pub capacity: f64,
    /// Fraction of the catalog and of the requests that is transient.
    pub w_snm: f64,
    /// Zipf skew of the stationary requests.
    pub zipf_delta: f64,
    /// Pareto shape of transient request volumes.
    pub pareto_beta: f64,
    /// Pareto scale (minimum volume) of transient request volumes.
    pub pareto_n_min: f64,
    pub lifespan_min: u32,
    pub lifespan_max: u32,
    /// Requests per slot R.
    pub requests_per_slot: u32,
    /// Exploration constant of the hybrid policy.
    pub beta: f64,
    pub allocation_window: usize,
    pub allocation_smoothing: f64,
    pub seeds: Vec<u64>,
    pub policies: Vec<String>,
    pub axis: Axis,
    /// Sweep values; empty means the axis defaults.
    pub values: Vec<f64>,
    /// Output directory. Not part of the config hash.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let catalog = CatalogConfig::default();
        let trace = TraceConfig::default();
        let sim = SimulationConfig::default();
        ExperimentConfig {
            horizon: trace.horizon,
            library_size: catalog.library_size,
            capacity: sim.capacity,
            w_snm: trace.w_snm,
            zipf_delta: trace.zipf_delta,
            pareto_beta: catalog.volume.beta,
            pareto_n_min: catalog.volume.n_min,
            lifespan_min: catalog.lifespan.0,
            lifespan_max: catalog.lifespan.1,
            requests_per_slot: trace.requests_per_slot,
            beta: sim.hybrid.beta,
            allocation_window: sim.allocation_window,
            allocation_smoothing: sim.allocation_smoothing,
            seeds: (DEFAULT_SEED_BASE..DEFAULT_SEED_BASE + DEFAULT_SEED_COUNT).collect(),
            policies: PolicyKind::ALL
                .iter()
                .map(|p| p.as_str().to_owned())
                .collect(),
            axis: Axis::LibrarySize,
            values: Vec::new(),
            out: PathBuf::from("out"),
        }
    }
}

const LIST_FIELDS: [&str; 3] = ["seeds", "policies", "values"];

/// Turns a raw environment string into a TOML value. Lists are written
/// comma separated; bare words that are not TOML literals become strings.
fn env_value(key: &str, raw: &str) -> toml::Value {
    if LIST_FIELDS.contains(&key) {
        let items = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(scalar_value)
            .collect();
        toml::Value::Array(items)
    } else {
        scalar_value(raw)
    }
}

fn scalar_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

impl ExperimentConfig {
    /// Defaults, then `path` if given, then `EDGECACHE_*` variables from
    /// `env`. The result is validated.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::config("config", e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for (name, raw) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            let value = env_value(&key, &raw);
            table.insert(key, value);
        }
        let config = Self::from_table(table)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::config("config", e.to_string()))?;
        let config = Self::from_table(table)?;
        config.validate()?;
        Ok(config)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        for (key, value) in &table {
            if value.is_table() {
                return Err(CliError::config(key, "nested tables are not allowed"));
            }
        }
        // Deserialize field by field so a type error can name its field.
        let defaults = toml::Table::try_from(ExperimentConfig::default())
            .map_err(|e| CliError::config("config", e.to_string()))?;
        for (key, value) in &table {
            if !defaults.contains_key(key) {
                return Err(CliError::config(key, "unknown field"));
            }
            let mut probe = defaults.clone();
            probe.insert(key.clone(), value.clone());
            probe
                .try_into::<ExperimentConfig>()
                .map_err(|e| CliError::config(key, e.message().to_owned()))?;
        }
        let mut merged = defaults;
        merged.extend(table);
        merged
            .try_into::<ExperimentConfig>()
            .map_err(|e| CliError::config("config", e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(CliError::config(field, reason))
            }
        }
        check(self.horizon >= 1, "horizon", "must be at least 1")?;
        check(self.library_size >= 2, "library_size", "must be at least 2")?;
        check(
            self.capacity.is_finite() && self.capacity >= 0.0,
            "capacity",
            "must be finite and non-negative",
        )?;
        check(
            (0.0..=1.0).contains(&self.w_snm),
            "w_snm",
            "must lie in [0, 1]",
        )?;
        check(
            self.zipf_delta.is_finite() && self.zipf_delta >= 0.0,
            "zipf_delta",
            "must be finite and non-negative",
        )?;
        check(
            self.pareto_beta.is_finite() && self.pareto_beta > 1.0,
            "pareto_beta",
            "must be finite and exceed 1",
        )?;
        check(
            self.pareto_n_min.is_finite() && self.pareto_n_min > 0.0,
            "pareto_n_min",
            "must be finite and positive",
        )?;
        check(self.lifespan_min >= 1, "lifespan_min", "must be at least 1")?;
        check(
            self.lifespan_max >= self.lifespan_min,
            "lifespan_max",
            "must not be below lifespan_min",
        )?;
        check(
            self.requests_per_slot >= 1,
            "requests_per_slot",
            "must be at least 1",
        )?;
        check(
            self.beta.is_finite() && self.beta >= 0.0,
            "beta",
            "must be finite and non-negative",
        )?;
        check(
            self.allocation_window >= 1,
            "allocation_window",
            "must be at least 1",
        )?;
        check(
            (0.0..1.0).contains(&self.allocation_smoothing),
            "allocation_smoothing",
            "must lie in [0, 1)",
        )?;
        check(!self.seeds.is_empty(), "seeds", "must not be empty")?;
        check(!self.policies.is_empty(), "policies", "must not be empty")?;
        for p in &self.policies {
            if p.parse::<PolicyKind>().is_err() {
                return Err(CliError::config(
                    "policies",
                    format!("unknown policy `{p}`, expected hybrid, popular or random"),
                ));
            }
        }
        check(
            self.values.windows(2).all(|w| w[0] < w[1]),
            "values",
            "must be strictly increasing",
        )?;
        for &v in &self.values {
            match self.axis {
                Axis::LibrarySize => check(
                    v.is_finite() && v >= 2.0 && v.fract() == 0.0,
                    "values",
                    "library sizes must be integers of at least 2",
                )?,
                Axis::Capacity => check(
                    v.is_finite() && v >= 0.0,
                    "values",
                    "capacities must be finite and non-negative",
                )?,
            }
        }
        Ok(())
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        if self.values.is_empty() {
            self.axis.default_values()
        } else {
            self.values.clone()
        }
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        self.policies
            .iter()
            .map(|p| {
                p.parse()
                    .map_err(|_| CliError::config("policies", format!("unknown policy `{p}`")))
            })
            .collect()
    }

    /// SHA-256 over the canonical JSON form of every field except `out`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config always serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn catalog_config(&self, library_size: usize) -> CatalogConfig {
        CatalogConfig {
            library_size,
            w_snm: self.w_snm,
            horizon: self.horizon,
            lifespan: (self.lifespan_min, self.lifespan_max),
            volume: ParetoVolume {
                beta: self.pareto_beta,
                n_min: self.pareto_n_min,
            },
            ..CatalogConfig::default()
        }
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            horizon: self.horizon,
            requests_per_slot: self.requests_per_slot,
            w_snm: self.w_snm,
            zipf_delta: self.zipf_delta,
        }
    }

    pub fn simulation_config(&self, capacity: f64) -> SimulationConfig {
        let mut sim = SimulationConfig {
            capacity,
            allocation_window: self.allocation_window,
            allocation_smoothing: self.allocation_smoothing,
            config_hash: self.hash(),
            ..SimulationConfig::default()
        };
        sim.hybrid.beta = self.beta;
        sim
    }
}

/// Parses a comma separated list such as `10,20,30`.
pub fn parse_list<T: FromStr>(field: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::config(field, format!("cannot parse `{s}`")))
        })
        .collect()
}
