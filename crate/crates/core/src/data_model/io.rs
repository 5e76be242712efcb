//! Target CSV and cluster-sample JSON-lines interchange.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{ClassLabel, ClusterSample, Target};
use crate::error::{Error, Result};

pub const TARGET_CSV_HEADER: [&str; 9] = [
    "time_s",
    "sensor_id",
    "range_m",
    "azimuth_rad",
    "vr_mps",
    "amplitude_db",
    "cluster_id",
    "object_id",
    "label",
];

/// A target row of the interchange CSV. `cluster_id` is empty before
/// clustering; DBSCAN noise is written as `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledTarget {
    pub target: Target,
    pub cluster_id: Option<i64>,
    pub object_id: i64,
    pub label: ClassLabel,
}

pub fn write_targets_csv<W: Write>(out: W, rows: &[LabeledTarget]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TARGET_CSV_HEADER)?;
    for row in rows {
        let t = &row.target;
        w.write_record([
            t.time.to_string(),
            t.sensor_id.to_string(),
            t.range.to_string(),
            t.azimuth.to_string(),
            t.vr_comp.to_string(),
            t.amplitude.to_string(),
            row.cluster_id.map(|c| c.to_string()).unwrap_or_default(),
            row.object_id.to_string(),
            row.label.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_targets_csv<R: Read>(input: R) -> Result<Vec<LabeledTarget>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TARGET_CSV_HEADER.iter().copied()) {
        return Err(Error::data(
            "target csv",
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let ctx = || format!("target csv row {}", line + 1);
        let f = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::data(ctx(), format!("column {}: {e}", TARGET_CSV_HEADER[i])))
        };
        let sensor_id = record[1]
            .parse::<u8>()
            .map_err(|e| Error::data(ctx(), format!("sensor_id: {e}")))?;
        let cluster_id = match record[6].trim() {
            "" => None,
            s => Some(
                s.parse::<i64>()
                    .map_err(|e| Error::data(ctx(), format!("cluster_id: {e}")))?,
            ),
        };
        let object_id = record[7]
            .parse::<i64>()
            .map_err(|e| Error::data(ctx(), format!("object_id: {e}")))?;
        let label: ClassLabel = record[8].parse()?;
        let target = Target::from_polar(f(0)?, f(2)?, f(3)?, f(4)?, f(5)?, sensor_id);
        if !(target.range >= 0.0) || !target.amplitude.is_finite() {
            return Err(Error::data(ctx(), "range must be >= 0 and amplitude finite"));
        }
        rows.push(LabeledTarget {
            target,
            cluster_id,
            object_id,
            label,
        });
    }
    Ok(rows)
}

pub fn write_samples_jsonl<W: Write>(mut out: W, samples: &[ClusterSample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_samples_jsonl<R: BufRead>(input: R) -> Result<Vec<ClusterSample>> {
    let mut samples = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line)?);
    }
    Ok(samples)
}
