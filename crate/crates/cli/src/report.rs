use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Format;

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV-ready table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// What a command produced: JSON results, an optional table for CSV output,
/// and any invariant violations found along the way.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub table: Option<Table>,
    pub violations: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub results: Value,
    pub timings: Timings,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Flatten scalar results into `key,value` rows.
fn key_values(results: &Value) -> Table {
    let mut rows = Vec::new();
    if let Value::Object(map) = results {
        for (k, v) in map {
            if !v.is_object() && !v.is_array() {
                rows.push(vec![k.clone(), cell(v)]);
            }
        }
    }
    Table {
        header: vec!["key", "value"],
        rows,
    }
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().context("flushing CSV")
}

pub fn render(report: &Report, table: Option<&Table>, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => match table {
            Some(t) => csv_bytes(t),
            None => csv_bytes(&key_values(&report.results)),
        },
    }
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
