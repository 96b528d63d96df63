//! Per-group statistics and precise/approximate speedups.

use std::collections::BTreeMap;

use super::experiment::{mode_name, App, ExperimentRecord};
use super::stats::{geometric_mean, Stats};
use crate::sap::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub app: App,
    pub bitrate: f64,
    pub distance: f64,
    pub mode: Mode,
    pub metric: String,
    pub stats: Stats<f64>,
    /// For xfer transfer times: mean(precise) / mean(approximate) at this
    /// grid point, on both modes' rows.
    pub speedup: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 10] =
    ["app", "bitrate", "distance", "mode", "metric", "n", "mean", "median", "stderr", "speedup"];

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    app: &'static str,
    bitrate: u64,
    distance: u64,
    mode: &'static str,
    metric: String,
}

/// Orders like f64 for the non-negative finite values the harness produces.
fn ord_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Groups records by (app, bitrate, distance, mode, metric).
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<Key, (&ExperimentRecord, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let key = Key {
            app: r.app.name(),
            bitrate: ord_bits(r.bitrate),
            distance: ord_bits(r.distance),
            mode: mode_name(r.mode),
            metric: r.metric.clone(),
        };
        groups.entry(key).or_insert_with(|| (r, Vec::new())).1.push(r.value);
    }

    let mut rows: Vec<SummaryRow> = groups
        .into_values()
        .map(|(first, values)| SummaryRow {
            app: first.app,
            bitrate: first.bitrate,
            distance: first.distance,
            mode: first.mode,
            metric: first.metric.clone(),
            stats: Stats::of(&values).expect("groups are non-empty"),
            speedup: None,
        })
        .collect();

    let mean_of = |rows: &[SummaryRow], b: f64, d: f64, m: Mode| {
        rows.iter()
            .find(|r| r.app == App::Xfer && r.metric == "transfer_time" && r.bitrate == b && r.distance == d && r.mode == m)
            .map(|r| r.stats.mean)
    };
    let speedups: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            if r.app != App::Xfer || r.metric != "transfer_time" {
                return None;
            }
            let p = mean_of(&rows, r.bitrate, r.distance, Mode::Precise)?;
            let a = mean_of(&rows, r.bitrate, r.distance, Mode::Approximate)?;
            (a > 0.0).then(|| p / a)
        })
        .collect();
    for (row, s) in rows.iter_mut().zip(speedups) {
        row.speedup = s;
    }
    rows
}

/// Speedup per (bitrate, distance), once each.
pub fn speedups(rows: &[SummaryRow]) -> Vec<(f64, f64, f64)> {
    rows.iter()
        .filter(|r| r.mode == Mode::Precise)
        .filter_map(|r| r.speedup.map(|s| (r.bitrate, r.distance, s)))
        .collect()
}

/// Geometric mean of the per-grid-point speedups; `None` without any.
pub fn geometric_mean_speedup(rows: &[SummaryRow]) -> Option<f64> {
    let s: Vec<f64> = speedups(rows).into_iter().map(|(_, _, s)| s).collect();
    (!s.is_empty()).then(|| geometric_mean(&s))
}

pub fn write_summary_csv(out: impl std::io::Write, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.app.name().to_string(),
            r.bitrate.to_string(),
            r.distance.to_string(),
            mode_name(r.mode).to_string(),
            r.metric.clone(),
            r.stats.n.to_string(),
            r.stats.mean.to_string(),
            r.stats.median.to_string(),
            r.stats.stderr.to_string(),
            r.speedup.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(distance: f64, mode: Mode, trial: u32, value: f64) -> ExperimentRecord {
        ExperimentRecord { app: App::Xfer, bitrate: 54.0, distance, mode, trial, metric: "transfer_time".into(), value }
    }

    #[test]
    fn groups_and_speedup() {
        let recs = vec![
            rec(6.0, Mode::Precise, 0, 3.0),
            rec(6.0, Mode::Precise, 1, 5.0),
            rec(6.0, Mode::Approximate, 0, 2.0),
            rec(6.0, Mode::Approximate, 1, 2.0),
            rec(8.0, Mode::Precise, 0, 9.0),
        ];
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 3);
        assert_eq!(speedups(&rows), vec![(54.0, 6.0, 2.0)]);
        assert!(rows.iter().filter(|r| r.distance == 8.0).all(|r| r.speedup.is_none()));
        assert_eq!(geometric_mean_speedup(&rows), Some(2.0));
    }

    #[test]
    fn mixed_metrics_never_get_speedup() {
        let mut r = rec(1.0, Mode::Precise, 0, 1.0);
        r.app = App::Streamer;
        r.metric = "flr".into();
        assert!(summarize(&[r]).iter().all(|r| r.speedup.is_none()));
    }

    proptest! {
        #[test]
        fn speedup_is_scale_invariant(
            times in proptest::collection::vec((0.1f64..100.0, 0.1f64..100.0), 1..6),
            k in 0.01f64..100.0,
        ) {
            let build = |scale: f64| -> Vec<ExperimentRecord> {
                times.iter().enumerate().flat_map(|(i, (p, a))| {
                    [rec(i as f64, Mode::Precise, 0, p * scale), rec(i as f64, Mode::Approximate, 0, a * scale)]
                }).collect()
            };
            let g1 = geometric_mean_speedup(&summarize(&build(1.0))).unwrap();
            let g2 = geometric_mean_speedup(&summarize(&build(k))).unwrap();
            prop_assert!((g1 - g2).abs() <= 1e-9 * g1);
        }
    }
}
