//! Command line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use crate::config::{parse_list, Axis, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::io::{
    read_catalog, read_hash, read_trace, write_catalog, write_file, write_metrics_json,
    write_slot_metrics, write_trace,
};
use crate::report::{render_table, summarize, write_summary};
use crate::sweep::{generate_workload, read_results, run_all, run_sweep, write_results};

use edgecache_core::{run_simulation, RunMetrics};

pub const CATALOG_FILE: &str = "catalog.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SLOTS_FILE: &str = "slots.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "edgecache", version, about = "Edge cache placement simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic catalog and request trace.
    Generate(Common),
    /// Simulate each policy on each seed and write per-run metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Replay this catalog instead of generating one per seed.
        #[arg(long, requires = "trace")]
        catalog: Option<PathBuf>,
        /// Replay this trace instead of generating one per seed.
        #[arg(long, requires = "catalog")]
        trace: Option<PathBuf>,
    },
    /// Sweep library size or capacity and write long-form results.
    Sweep(Common),
    /// Aggregate a results file over seeds.
    Report {
        /// Results CSV written by `sweep`.
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Args)]
pub struct Common {
    /// Flat TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma separated policy names.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub horizon: Option<u32>,
    #[arg(long)]
    pub library_size: Option<usize>,
    #[arg(long)]
    pub capacity: Option<f64>,
    #[arg(long)]
    pub w_snm: Option<f64>,
    /// Exploration constant of the hybrid policy.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Zipf skew of stationary requests.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub requests_per_slot: Option<u32>,
    /// `library_size` or `capacity`.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma separated sweep values.
    #[arg(long)]
    pub values: Option<String>,
}

impl Common {
    /// Loads the config file and environment, then applies the flags.
    pub fn resolve<I>(&self, env: I) -> Result<ExperimentConfig>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut c = ExperimentConfig::load(self.config.as_deref(), env)?;
        if let Some(s) = self.seed {
            c.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            c.out.clone_from(o);
        }
        if let Some(p) = &self.policy {
            c.policies = parse_list("policies", p)?;
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = self.library_size {
            c.library_size = v;
        }
        if let Some(v) = self.capacity {
            c.capacity = v;
        }
        if let Some(v) = self.w_snm {
            c.w_snm = v;
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.delta {
            c.zipf_delta = v;
        }
        if let Some(v) = self.requests_per_slot {
            c.requests_per_slot = v;
        }
        if let Some(a) = &self.axis {
            c.axis = a.parse::<Axis>()?;
        }
        if let Some(v) = &self.values {
            c.values = parse_list("values", v)?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, std::env::vars()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute<I>(command: Command, env: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    match command {
        Command::Generate(common) => cmd_generate(&common.resolve(env)?),
        Command::Run {
            common,
            catalog,
            trace,
        } => {
            let config = common.resolve(env)?;
            let inputs = catalog.zip(trace);
            cmd_run(
                &config,
                inputs.as_ref().map(|(c, t)| (c.as_path(), t.as_path())),
            )?;
            Ok(())
        }
        Command::Sweep(common) => cmd_sweep(&common.resolve(env)?),
        Command::Report { input, out } => {
            let out =
                out.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
            cmd_report(&input, &out)
        }
    }
}

fn save_resolved(config: &ExperimentConfig) -> Result<()> {
    let path = config.out.join(RESOLVED_CONFIG_FILE);
    write_file(&path, |w| {
        use std::io::Write;
        w.write_all(config.to_toml_string().as_bytes())
            .map_err(|e| CliError::io(&path, e))
    })
}

/// Writes the catalog and trace of the first configured seed.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<()> {
    let seed = config.seeds[0];
    let hash = config.hash();
    let w = generate_workload(config, config.library_size, seed)?;
    write_file(&config.out.join(CATALOG_FILE), |f| {
        write_catalog(f, &w.catalog, &hash)
    })?;
    write_file(&config.out.join(TRACE_FILE), |f| {
        write_trace(f, &w.trace, &hash)
    })?;
    save_resolved(config)?;
    info!(
        "seed {seed}: {} items, {} requests, {} transient fallbacks",
        w.catalog.len(),
        w.trace.len(),
        w.stats.snm_fallbacks
    );
    println!("config_hash={hash}");
    Ok(())
}

/// Runs every policy on every seed. With `inputs`, the given catalog and
/// trace are replayed for all seeds and their contents join the hash.
pub fn cmd_run(
    config: &ExperimentConfig,
    inputs: Option<(&Path, &Path)>,
) -> Result<Vec<RunMetrics>> {
    let (runs, hash) = match inputs {
        None => (run_all(config)?, config.hash()),
        Some((cat_path, trace_path)) => {
            let cat_bytes = std::fs::read(cat_path).map_err(|e| CliError::io(cat_path, e))?;
            let trace_bytes = std::fs::read(trace_path).map_err(|e| CliError::io(trace_path, e))?;
            let catalog = read_catalog(cat_bytes.as_slice(), &cat_path.display().to_string())?;
            let trace = read_trace(
                trace_bytes.as_slice(),
                &trace_path.display().to_string(),
                &catalog,
                Some(config.horizon),
            )?;
            let mut h = Sha256::new();
            h.update(config.hash());
            h.update(&cat_bytes);
            h.update(&trace_bytes);
            let hash = hex::encode(h.finalize());
            let mut sim = config.simulation_config(config.capacity);
            sim.config_hash.clone_from(&hash);
            let mut runs = Vec::new();
            for &seed in &config.seeds {
                for kind in config.policy_kinds()? {
                    runs.push(run_simulation(&catalog, &trace, kind.as_str(), &sim, seed)?);
                }
            }
            (runs, hash)
        }
    };
    write_file(&config.out.join(METRICS_FILE), |f| {
        write_metrics_json(f, &runs, &hash)
    })?;
    write_file(&config.out.join(SLOTS_FILE), |f| {
        write_slot_metrics(f, &runs, &hash)
    })?;
    save_resolved(config)?;
    for r in &runs {
        let s = &r.summary;
        println!(
            "seed={} policy={} mean_hit_ratio={:.4} final_regret={:.3}",
            s.seed, s.policy, s.mean_hit_ratio, s.final_regret
        );
    }
    println!("config_hash={hash}");
    Ok(runs)
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let hash = config.hash();
    let rows = run_sweep(config)?;
    let path = config.out.join(RESULTS_FILE);
    write_file(&path, |f| write_results(f, &rows, &hash))?;
    save_resolved(config)?;
    print!("{}", render_table(&summarize(&rows)));
    println!("config_hash={hash}");
    info!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

pub fn cmd_report(input: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let source = input.display().to_string();
    let rows = read_results(text.as_bytes(), &source)?;
    let hash = read_hash(&text).unwrap_or("unknown").to_owned();
    let summary = summarize(&rows);
    write_file(&out_dir.join(SUMMARY_FILE), |f| {
        write_summary(f, &summary, &hash)
    })?;
    print!("{}", render_table(&summary));
    Ok(())
}
