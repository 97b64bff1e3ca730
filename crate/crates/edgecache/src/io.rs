//! CSV and JSON artifacts.
//!
//! Every CSV starts with a `# config_hash=<hex>` comment line; readers skip
//! lines starting with `#`. Floats use Rust's shortest round-trip format, so
//! a written file parses back to identical values.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use edgecache_core::catalog::{Catalog, ContentId, ContentItem, Regime, SnmDynamics, FEATURE_DIM};
use edgecache_core::workload::{Request, RequestTrace};
use edgecache_core::{RunMetrics, RunSummary};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CATALOG_HEADER: [&str; 10] = [
    "id",
    "regime",
    "size",
    "f_size",
    "f_bandwidth",
    "f_value",
    "f_category",
    "arrival",
    "lifespan",
    "volume",
];
pub const TRACE_HEADER: [&str; 2] = ["slot", "content_id"];
pub const SLOT_HEADER: [&str; 10] = [
    "seed",
    "policy",
    "slot",
    "requests",
    "hits",
    "hit_ratio",
    "oracle_hit_ratio",
    "regret_increment",
    "cumulative_regret",
    "w_snm",
];

pub fn hash_line(config_hash: &str) -> String {
    format!("# config_hash={config_hash}\n")
}

/// Returns the hash from a leading `# config_hash=` line, if any.
pub fn read_hash(text: &str) -> Option<&str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config_hash="))
        .map(str::trim)
}

fn csv_writer<W: Write>(mut out: W, config_hash: &str, header: &[&str]) -> Result<csv::Writer<W>> {
    out.write_all(hash_line(config_hash).as_bytes())
        .map_err(|e| CliError::io("<output>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_write_error)?;
    Ok(w)
}

fn csv_write_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io("<output>", io),
        other => CliError::io("<output>", std::io::Error::other(format!("{other:?}"))),
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn read_error(source: &str, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(source, io),
        other => CliError::parse(source, line, format!("{other:?}")),
    }
}

fn check_header<R: Read>(
    reader: &mut csv::Reader<R>,
    source: &str,
    expected: &[&str],
) -> Result<()> {
    let header = reader.headers().map_err(|e| read_error(source, e))?.clone();
    if header.is_empty() {
        return Err(CliError::parse(source, 1, "empty file"));
    }
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::parse(
            source,
            line_of(&header),
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    source: &str,
) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse()
        .map_err(|_| CliError::parse(source, line_of(rec), format!("bad {name} `{raw}`")))
}

pub fn write_catalog<W: Write>(out: W, catalog: &Catalog, config_hash: &str) -> Result<()> {
    let mut w = csv_writer(out, config_hash, &CATALOG_HEADER)?;
    for item in catalog.items() {
        let mut row = vec![
            item.id.to_string(),
            item.regime.as_str().to_owned(),
            item.size.to_string(),
        ];
        row.extend(item.features.iter().map(f64::to_string));
        match item.snm {
            Some(d) => row.extend([
                d.arrival.to_string(),
                d.lifespan.to_string(),
                d.volume.to_string(),
            ]),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&row).map_err(csv_write_error)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

pub fn read_catalog<R: Read>(input: R, source: &str) -> Result<Catalog> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, source, &CATALOG_HEADER)?;
    let mut items = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| read_error(source, e))?;
        let line = line_of(&rec);
        let id = ContentId(field(&rec, 0, "id", source)?);
        let regime: Regime = field(&rec, 1, "regime", source)?;
        let size = field(&rec, 2, "size", source)?;
        let features = (3..3 + FEATURE_DIM)
            .map(|i| field(&rec, i, CATALOG_HEADER[i], source))
            .collect::<Result<Vec<f64>>>()?;
        let snm = match regime {
            Regime::Irm => None,
            Regime::Snm => Some(SnmDynamics {
                arrival: field(&rec, 7, "arrival", source)?,
                lifespan: field(&rec, 8, "lifespan", source)?,
                volume: field(&rec, 9, "volume", source)?,
            }),
        };
        let item = ContentItem::new(id, size, regime, features, snm)
            .map_err(|e| CliError::parse(source, line, e.to_string()))?;
        items.push(item);
    }
    if items.is_empty() {
        return Err(CliError::parse(source, 1, "no catalog rows"));
    }
    Catalog::new(items).map_err(|e| CliError::parse(source, 0, e.to_string()))
}

pub fn write_trace<W: Write>(out: W, trace: &RequestTrace, config_hash: &str) -> Result<()> {
    let mut w = csv_writer(out, config_hash, &TRACE_HEADER)?;
    for r in trace.events() {
        w.write_record([r.slot.to_string(), r.content.to_string()])
            .map_err(csv_write_error)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

/// Reads a trace and checks every id against `catalog`. The horizon is the
/// largest slot seen unless `horizon` is given.
pub fn read_trace<R: Read>(
    input: R,
    source: &str,
    catalog: &Catalog,
    horizon: Option<u32>,
) -> Result<RequestTrace> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, source, &TRACE_HEADER)?;
    let mut events = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| read_error(source, e))?;
        let slot: u32 = field(&rec, 0, "slot", source)?;
        let content = ContentId(field(&rec, 1, "content_id", source)?);
        if !catalog.contains(content) {
            return Err(CliError::parse(
                source,
                line_of(&rec),
                format!("unknown content id {content}"),
            ));
        }
        if slot == 0 {
            return Err(CliError::parse(source, line_of(&rec), "slots start at 1"));
        }
        events.push(Request { slot, content });
    }
    let horizon = horizon.unwrap_or_else(|| events.iter().map(|r| r.slot).max().unwrap_or(0));
    RequestTrace::new(horizon, events).map_err(|e| CliError::parse(source, 0, e.to_string()))
}

/// Per-slot rows of several runs, grouped by seed in the given order.
pub fn write_slot_metrics<W: Write>(out: W, runs: &[RunMetrics], config_hash: &str) -> Result<()> {
    let mut w = csv_writer(out, config_hash, &SLOT_HEADER)?;
    for run in runs {
        let s = &run.summary;
        for (m, cum) in run.per_slot.iter().zip(&run.cumulative_regret) {
            w.write_record([
                s.seed.to_string(),
                s.policy.clone(),
                m.slot.to_string(),
                m.requests.to_string(),
                m.hits.to_string(),
                m.hit_ratio.to_string(),
                m.oracle_hit_ratio.to_string(),
                m.regret_increment.to_string(),
                cum.to_string(),
                m.w_snm.to_string(),
            ])
            .map_err(csv_write_error)?;
        }
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub config_hash: String,
    pub runs: Vec<RunSummary>,
}

pub fn write_metrics_json<W: Write>(out: W, runs: &[RunMetrics], config_hash: &str) -> Result<()> {
    let file = MetricsFile {
        config_hash: config_hash.to_owned(),
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &file)
        .map_err(|e| CliError::io("<output>", std::io::Error::other(e)))?;
    out.write_all(b"\n")
        .map_err(|e| CliError::io("<output>", e))
}

/// Creates `path` and hands a buffered writer to `f`, attaching the path to
/// any I/O error.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| match e {
        CliError::Io { source, .. } => CliError::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| CliError::io(path, e))
}
