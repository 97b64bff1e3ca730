//! Single runs and parameter sweeps.

use std::io::{Read, Write};

use edgecache_core::catalog::build_catalog;
use edgecache_core::workload::{generate_trace, TraceStats};
use edgecache_core::{run_simulation, Catalog, PolicyKind, RequestTrace, RunMetrics};
use rayon::prelude::*;

use crate::config::{Axis, ExperimentConfig};
use crate::error::{CliError, Result};

pub const RESULTS_HEADER: [&str; 6] = [
    "axis",
    "value",
    "policy",
    "seed",
    "mean_hit_ratio",
    "final_regret",
];

#[derive(Debug, Clone)]
pub struct Workload {
    pub catalog: Catalog,
    pub trace: RequestTrace,
    pub stats: TraceStats,
}

pub fn generate_workload(
    config: &ExperimentConfig,
    library_size: usize,
    seed: u64,
) -> Result<Workload> {
    let catalog = build_catalog(&config.catalog_config(library_size), seed)?;
    let (trace, stats) = generate_trace(&catalog, &config.trace_config(), seed)?;
    Ok(Workload {
        catalog,
        trace,
        stats,
    })
}

/// Runs every configured policy on every configured seed at the config's
/// own library size and capacity. Output is ordered by seed, then policy.
pub fn run_all(config: &ExperimentConfig) -> Result<Vec<RunMetrics>> {
    let kinds = config.policy_kinds()?;
    let sim = config.simulation_config(config.capacity);
    let per_seed: Vec<Result<Vec<RunMetrics>>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let w = generate_workload(config, config.library_size, seed)?;
            kinds
                .iter()
                .map(|k| {
                    Ok(run_simulation(
                        &w.catalog,
                        &w.trace,
                        k.as_str(),
                        &sim,
                        seed,
                    )?)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for runs in per_seed {
        out.extend(runs?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    pub mean_hit_ratio: f64,
    pub final_regret: f64,
}

fn row(axis: Axis, value: f64, m: &RunMetrics, policy: PolicyKind) -> SweepRow {
    SweepRow {
        axis,
        value,
        policy,
        seed: m.summary.seed,
        mean_hit_ratio: m.summary.mean_hit_ratio,
        final_regret: m.summary.final_regret,
    }
}

/// Runs the configured sweep. A library size sweep regenerates the
/// workload for every size at the configured capacity. A capacity sweep
/// generates one workload per seed at the configured library size and
/// replays it at every capacity. Runs execute in parallel; the result is
/// sorted by value, policy and seed, so it does not depend on scheduling.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let kinds = config.policy_kinds()?;
    let values = config.sweep_values();
    let axis = config.axis;
    let jobs: Vec<(Option<f64>, u64)> = match axis {
        Axis::LibrarySize => values
            .iter()
            .flat_map(|&v| config.seeds.iter().map(move |&s| (Some(v), s)))
            .collect(),
        Axis::Capacity => config.seeds.iter().map(|&s| (None, s)).collect(),
    };
    let batches: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let mut rows = Vec::new();
            match value {
                Some(f) => {
                    let w = generate_workload(config, f as usize, seed)?;
                    let sim = config.simulation_config(config.capacity);
                    for &k in &kinds {
                        let m = run_simulation(&w.catalog, &w.trace, k.as_str(), &sim, seed)?;
                        rows.push(row(axis, f, &m, k));
                    }
                }
                None => {
                    let w = generate_workload(config, config.library_size, seed)?;
                    for &c in &values {
                        let sim = config.simulation_config(c);
                        for &k in &kinds {
                            let m = run_simulation(&w.catalog, &w.trace, k.as_str(), &sim, seed)?;
                            rows.push(row(axis, c, &m, k));
                        }
                    }
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for b in batches {
        rows.extend(b?);
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.policy.cmp(&b.policy))
            .then(a.seed.cmp(&b.seed))
    });
}

pub fn write_results<W: Write>(out: W, rows: &[SweepRow], config_hash: &str) -> Result<()> {
    let mut out = out;
    out.write_all(crate::io::hash_line(config_hash).as_bytes())
        .map_err(|e| CliError::io("<output>", e))?;
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| CliError::io("<output>", std::io::Error::other(e));
    w.write_record(RESULTS_HEADER).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.axis.as_str().to_owned(),
            r.value.to_string(),
            r.policy.as_str().to_owned(),
            r.seed.to_string(),
            r.mean_hit_ratio.to_string(),
            r.final_regret.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

/// Parses a results CSV. Errors carry the 1-based line number.
pub fn read_results<R: Read>(input: R, source: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input);
    let parse_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        CliError::parse(source, line, e.to_string())
    };
    let header = reader.headers().map_err(parse_err)?.clone();
    if header.is_empty() {
        return Err(CliError::parse(source, 1, "empty results file"));
    }
    if header.iter().ne(RESULTS_HEADER) {
        let line = header.position().map_or(1, |p| p.line());
        return Err(CliError::parse(
            source,
            line,
            format!("expected header `{}`", RESULTS_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(parse_err)?;
        let axis: Axis = parse_field(&rec, 0, source)?;
        let value: f64 = parse_field(&rec, 1, source)?;
        let policy: PolicyKind = parse_field(&rec, 2, source)?;
        let seed: u64 = parse_field(&rec, 3, source)?;
        let mean_hit_ratio: f64 = parse_field(&rec, 4, source)?;
        let final_regret: f64 = parse_field(&rec, 5, source)?;
        rows.push(SweepRow {
            axis,
            value,
            policy,
            seed,
            mean_hit_ratio,
            final_regret,
        });
    }
    if rows.is_empty() {
        return Err(CliError::parse(source, 1, "no result rows"));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    source: &str,
) -> Result<T> {
    let raw = &rec[idx];
    raw.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        CliError::parse(source, line, format!("bad {} `{raw}`", RESULTS_HEADER[idx]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(axis: Axis, values: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            horizon: 30,
            requests_per_slot: 20,
            library_size: 30,
            capacity: 8.0,
            seeds: vec![1, 2],
            axis,
            values,
            ..Default::default()
        }
    }

    #[test]
    fn capacity_sweep_is_a_full_cartesian_product() {
        let rows = run_sweep(&tiny(Axis::Capacity, vec![2.0, 4.0, 6.0])).unwrap();
        assert_eq!(rows.len(), 3 * 3 * 2);
        assert!(rows.iter().all(|r| r.axis == Axis::Capacity));
    }

    #[test]
    fn results_round_trip() {
        let rows = run_sweep(&tiny(Axis::LibrarySize, vec![20.0, 30.0])).unwrap();
        let mut buf = Vec::new();
        write_results(&mut buf, &rows, "h").unwrap();
        let back = read_results(buf.as_slice(), "r.csv").unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn run_all_orders_by_seed_then_policy() {
        let runs = run_all(&tiny(Axis::Capacity, vec![])).unwrap();
        let keys: Vec<(u64, &str)> = runs
            .iter()
            .map(|r| (r.summary.seed, r.summary.policy.as_str()))
            .collect();
        assert_eq!(
            keys,
            [
                (1, "hybrid"),
                (1, "popular"),
                (1, "random"),
                (2, "hybrid"),
                (2, "popular"),
                (2, "random")
            ]
        );
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = "# config_hash=h\naxis,value,policy,seed,mean_hit_ratio,final_regret\ncapacity,10,hybrid,1,0.5,2\ncapacity,10,lru,1,0.5,2\n";
        match read_results(text.as_bytes(), "r.csv") {
            Err(CliError::Parse { line, reason, .. }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("lru"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(
            read_results("".as_bytes(), "r"),
            Err(CliError::Parse { .. })
        ));
        let header_only = RESULTS_HEADER.join(",") + "\n";
        assert!(matches!(
            read_results(header_only.as_bytes(), "r"),
            Err(CliError::Parse { .. })
        ));
    }
}
