//! Feature CSV: a `# registry=<version>` comment line, then the header
//! `cluster_id,object_id,window_start,label,<feature columns>`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data_model::ClassLabel;
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 4] = ["cluster_id", "object_id", "window_start", "label"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub cluster_id: i64,
    pub object_id: i64,
    pub window_start: f64,
    pub label: ClassLabel,
    pub values: Vec<f64>,
}

/// Feature rows with the column names they were written under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub registry_version: String,
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn write_feature_csv<W: Write>(mut out: W, table: &FeatureTable) -> Result<()> {
    writeln!(out, "# registry={}", table.registry_version)?;
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(table.names.iter().map(String::as_str))
        .collect();
    w.write_record(&header)?;
    for row in &table.rows {
        if row.values.len() != table.names.len() {
            return Err(Error::data(
                "feature csv",
                format!("row has {} values for {} columns", row.values.len(), table.names.len()),
            ));
        }
        let mut rec = vec![
            row.cluster_id.to_string(),
            row.object_id.to_string(),
            row.window_start.to_string(),
            row.label.name().to_string(),
        ];
        rec.extend(row.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(mut input: R) -> Result<FeatureTable> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let registry_version = first
        .trim()
        .strip_prefix("# registry=")
        .ok_or_else(|| Error::data("feature csv", "missing `# registry=` header line"))?
        .to_string();

    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let header = r.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len()
        || header.iter().take(FIXED_COLUMNS.len()).ne(FIXED_COLUMNS.iter().copied())
    {
        return Err(Error::data("feature csv", "header must start with cluster_id,object_id,window_start,label"));
    }
    let names: Vec<String> = header.iter().skip(FIXED_COLUMNS.len()).map(String::from).collect();
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let ctx = format!("feature csv row {}", line + 1);
        let parse_i = |i: usize| {
            record[i]
                .parse::<i64>()
                .map_err(|e| Error::data(ctx.clone(), format!("{}: {e}", FIXED_COLUMNS[i])))
        };
        let values = record
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(|s| s.parse::<f64>().map_err(|e| Error::data(ctx.clone(), e.to_string())))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(FeatureRow {
            cluster_id: parse_i(0)?,
            object_id: parse_i(1)?,
            window_start: record[2]
                .parse()
                .map_err(|e| Error::data(ctx.clone(), format!("window_start: {e}")))?,
            label: record[3].parse()?,
            values,
        });
    }
    Ok(FeatureTable {
        registry_version,
        names,
        rows,
    })
}
