//! Seed aggregation of sweep results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use edgecache_core::PolicyKind;

use crate::config::Axis;
use crate::error::{CliError, Result};
use crate::sweep::SweepRow;

pub const SUMMARY_HEADER: [&str; 10] = [
    "axis",
    "value",
    "policy",
    "seeds",
    "hit_ratio_mean",
    "hit_ratio_stderr",
    "regret_mean",
    "regret_stderr",
    "improvement_vs_popular",
    "improvement_vs_random",
];

/// Sample mean and standard error of the mean. The error is 0 for a
/// single observation.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(a - b) / b`, or `None` when `b` is zero.
pub fn relative_improvement(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| (a - b) / b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub axis: Axis,
    pub value: f64,
    pub policy: PolicyKind,
    pub seeds: usize,
    pub hit_ratio: (f64, f64),
    pub regret: (f64, f64),
    /// Filled on hybrid rows when the baseline is present at the same point.
    pub improvement_vs_popular: Option<f64>,
    pub improvement_vs_random: Option<f64>,
}

/// Axis value, then per-seed hit ratios and final regrets.
type Group = (f64, Vec<f64>, Vec<f64>);

pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Axis, u64, PolicyKind), Group> = BTreeMap::new();
    for r in rows {
        let key = (r.axis, r.value.to_bits(), r.policy);
        let g = groups
            .entry(key)
            .or_insert((r.value, Vec::new(), Vec::new()));
        g.1.push(r.mean_hit_ratio);
        g.2.push(r.final_regret);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((axis, _, policy), (value, hits, regrets))| SummaryRow {
            axis,
            value,
            policy,
            seeds: hits.len(),
            hit_ratio: mean_stderr(&hits),
            regret: mean_stderr(&regrets),
            improvement_vs_popular: None,
            improvement_vs_random: None,
        })
        .collect();
    out.sort_by(|a, b| {
        a.axis
            .cmp(&b.axis)
            .then(a.value.total_cmp(&b.value))
            .then(a.policy.cmp(&b.policy))
    });
    let lookup = |axis: Axis, value: f64, p: PolicyKind, rows: &[SummaryRow]| {
        rows.iter()
            .find(|r| r.axis == axis && r.value == value && r.policy == p)
            .map(|r| r.hit_ratio.0)
    };
    let snapshot = out.clone();
    for r in out.iter_mut().filter(|r| r.policy == PolicyKind::Hybrid) {
        let h = r.hit_ratio.0;
        r.improvement_vs_popular = lookup(r.axis, r.value, PolicyKind::Popular, &snapshot)
            .and_then(|p| relative_improvement(h, p));
        r.improvement_vs_random = lookup(r.axis, r.value, PolicyKind::Random, &snapshot)
            .and_then(|p| relative_improvement(h, p));
    }
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow], config_hash: &str) -> Result<()> {
    let mut out = out;
    out.write_all(crate::io::hash_line(config_hash).as_bytes())
        .map_err(|e| CliError::io("<output>", e))?;
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| CliError::io("<output>", std::io::Error::other(e));
    w.write_record(SUMMARY_HEADER).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.axis.as_str().to_owned(),
            r.value.to_string(),
            r.policy.as_str().to_owned(),
            r.seeds.to_string(),
            r.hit_ratio.0.to_string(),
            r.hit_ratio.1.to_string(),
            r.regret.0.to_string(),
            r.regret.1.to_string(),
            opt(r.improvement_vs_popular),
            opt(r.improvement_vs_random),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:+.1}%", v * 100.0))
        .unwrap_or_else(|| "-".into())
}

/// Fixed-width table for terminals.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<13} {:>8} {:<8} {:>5} {:>17} {:>19} {:>9} {:>9}",
        "axis", "value", "policy", "seeds", "hit ratio", "regret", "vs pop", "vs rand"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<13} {:>8} {:<8} {:>5} {:>8.4} ± {:<6.4} {:>9.2} ± {:<7.2} {:>9} {:>9}",
            r.axis.as_str(),
            r.value,
            r.policy.as_str(),
            r.seeds,
            r.hit_ratio.0,
            r.hit_ratio.1,
            r.regret.0,
            r.regret.1,
            pct(r.improvement_vs_popular),
            pct(r.improvement_vs_random),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, policy: PolicyKind, seed: u64, hit: f64, regret: f64) -> SweepRow {
        SweepRow {
            axis: Axis::Capacity,
            value,
            policy,
            seed,
            mean_hit_ratio: hit,
            final_regret: regret,
        }
    }

    #[test]
    fn mean_and_stderr_match_hand_values() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, stderr sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn improvement_of_point_six_over_point_five_is_twenty_percent() {
        let rows = [
            row(10.0, PolicyKind::Hybrid, 1, 0.6, 1.0),
            row(10.0, PolicyKind::Popular, 1, 0.5, 2.0),
        ];
        let s = summarize(&rows);
        let h = s.iter().find(|r| r.policy == PolicyKind::Hybrid).unwrap();
        assert!((h.improvement_vs_popular.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(h.improvement_vs_random, None);
        let p = s.iter().find(|r| r.policy == PolicyKind::Popular).unwrap();
        assert_eq!(p.improvement_vs_popular, None);
    }

    #[test]
    fn single_policy_leaves_improvements_empty() {
        let rows = [
            row(10.0, PolicyKind::Hybrid, 1, 0.6, 1.0),
            row(10.0, PolicyKind::Hybrid, 2, 0.8, 3.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].seeds, 2);
        assert!((s[0].hit_ratio.0 - 0.7).abs() < 1e-12);
        assert_eq!(s[0].regret.0, 2.0);
        let mut buf = Vec::new();
        write_summary(&mut buf, &s, "h").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(2).unwrap().ends_with(",,"), "{text}");
    }

    #[test]
    fn groups_are_ordered_by_value_then_policy() {
        let rows = [
            row(20.0, PolicyKind::Random, 1, 0.1, 1.0),
            row(10.0, PolicyKind::Random, 1, 0.1, 1.0),
            row(10.0, PolicyKind::Hybrid, 1, 0.2, 1.0),
        ];
        let keys: Vec<(f64, PolicyKind)> = summarize(&rows)
            .iter()
            .map(|r| (r.value, r.policy))
            .collect();
        assert_eq!(
            keys,
            [
                (10.0, PolicyKind::Hybrid),
                (10.0, PolicyKind::Random),
                (20.0, PolicyKind::Random)
            ]
        );
    }

    #[test]
    fn zero_baseline_has_no_improvement() {
        assert_eq!(relative_improvement(0.3, 0.0), None);
    }

    #[test]
    fn table_has_one_line_per_group() {
        let rows = [
            row(10.0, PolicyKind::Hybrid, 1, 0.6, 1.0),
            row(10.0, PolicyKind::Popular, 1, 0.5, 2.0),
        ];
        let t = render_table(&summarize(&rows));
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("+20.0%"));
    }
}
