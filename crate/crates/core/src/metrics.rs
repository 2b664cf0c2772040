//! Metrics records and their on-disk forms: one JSON object per line plus a
//! flat CSV with identical content. Emission is byte-stable for identical
//! records so reruns under one seed can be compared with a plain diff.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation point of a running experiment. Counters are cumulative
/// from the start of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Training round the record closes (1-based, so round 1 is the first).
    pub round: usize,
    /// Wall-clock-equivalent time in round units.
    pub time: f64,
    pub strategy: String,
    /// Test accuracy in [0, 1].
    pub accuracy: f64,
    /// Mean local training loss across this round's training jobs.
    pub train_loss: f64,
    /// Cumulative training FLOPs estimate.
    pub cumulative_flops: f64,
    /// Cumulative bits moved over contacts, both directions.
    pub cumulative_bits: f64,
}

/// Write `metrics.jsonl` and `metrics.csv` under `dir`, creating it if
/// needed. Returns the two file paths.
pub fn emit_metrics(records: &[MetricsRecord], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if records.is_empty() {
        return Err(Error::rejected("no metrics records to emit"));
    }
    fs::create_dir_all(dir)?;

    let jsonl_path = dir.join("metrics.jsonl");
    let mut jsonl = Vec::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::rejected(format!("metrics serialization failed: {e}")))?;
        jsonl.extend_from_slice(line.as_bytes());
        jsonl.push(b'\n');
    }
    fs::File::create(&jsonl_path)?.write_all(&jsonl)?;

    let csv_path = dir.join("metrics.csv");
    let mut writer = csv::Writer::from_writer(Vec::new());
    for record in records {
        writer
            .serialize(record)
            .map_err(|e| Error::rejected(format!("metrics csv failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::rejected(format!("metrics csv flush failed: {e}")))?;
    fs::File::create(&csv_path)?.write_all(&bytes)?;

    Ok((jsonl_path, csv_path))
}

/// Parse a `metrics.jsonl` file back into records.
pub fn read_jsonl(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            line: (i + 1) as u64,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}

/// Parse a `metrics.csv` file back into records.
pub fn read_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for row in reader.deserialize() {
        records.push(row.map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}
