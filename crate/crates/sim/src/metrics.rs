//! Per-round metrics, CSV emission, and JSON run summaries.
//!
//! The CSV schema is `round,p_fastest,cum_throughput` with one row per round.
//! Floats are printed with Rust's shortest round-trip formatting, so emitting
//! and re-parsing is lossless and byte-identical across runs with one seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Rounds at which summaries report cumulative throughput.
pub const THROUGHPUT_CHECKPOINTS: [u64; 5] = [10, 100, 1_000, 10_000, 20_000];

/// Probability levels whose first-crossing round the summary reports.
pub const MILESTONE_LEVELS: [f64; 3] = [0.5, 0.9, 0.99];

/// One round of averaged results across trials.
///
/// `p_fastest` is the fraction of trials whose choice this round was the
/// fastest-mean variant. `cum_throughput` is rounds completed divided by
/// total runtime spent, averaged across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: u64,
    pub p_fastest: f64,
    pub cum_throughput: f64,
}

/// Renders records as CSV, header included.
pub fn emit_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str("round,p_fastest,cum_throughput\n");
    for r in records {
        writeln!(out, "{},{},{}", r.round, r.p_fastest, r.cum_throughput)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Parses CSV produced by [`emit_csv`]; exact inverse for finite values.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("round,p_fastest,cum_throughput") => {}
        Some(other) => return Err(Error::Parse(format!("unexpected header {other:?}"))),
        None => return Err(Error::Parse("empty input".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("row {}: missing {name}", i + 2)))
        };
        let round = next("round")?
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("row {}: round: {e}", i + 2)))?;
        let p_fastest = next("p_fastest")?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("row {}: p_fastest: {e}", i + 2)))?;
        let cum_throughput = next("cum_throughput")?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("row {}: cum_throughput: {e}", i + 2)))?;
        if fields.next().is_some() {
            return Err(Error::Parse(format!("row {}: too many fields", i + 2)));
        }
        records.push(MetricsRecord { round, p_fastest, cum_throughput });
    }
    Ok(records)
}

/// First round (if any) where `p_fastest` reaches `level`.
pub fn first_round_reaching(records: &[MetricsRecord], level: f64) -> Option<u64> {
    records.iter().find(|r| r.p_fastest >= level).map(|r| r.round)
}

/// Cumulative throughput at `round`, if the run covered it.
pub fn throughput_at(records: &[MetricsRecord], round: u64) -> Option<f64> {
    records.iter().find(|r| r.round == round).map(|r| r.cum_throughput)
}

/// Builds the JSON run summary: resolved config echo, seed, milestone
/// rounds for each probability level, and throughput at fixed checkpoints.
pub fn summary_json(config: Value, seed: u64, records: &[MetricsRecord]) -> Value {
    let mut milestones = BTreeMap::new();
    for level in MILESTONE_LEVELS {
        let key = format!("p{:02}_round", (level * 100.0).round() as u64);
        milestones.insert(key, json!(first_round_reaching(records, level)));
    }
    let mut checkpoints = BTreeMap::new();
    for round in THROUGHPUT_CHECKPOINTS {
        checkpoints.insert(format!("round_{round}"), json!(throughput_at(records, round)));
    }
    json!({
        "config": config,
        "seed": seed,
        "milestones": milestones,
        "cum_throughput": checkpoints,
    })
}

/// Writes `contents` to `path`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}
