//! Table assembly and deterministic CSV/JSON emission.
//!
//! Every file carries a commented provenance header (schema version,
//! command, seed, config digest, git hash) so a run can be reproduced
//! byte-for-byte; only the timestamp line is allowed to differ.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip float formatting keeps files reproducible
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra provenance lines (key, value).
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.meta.push((key.to_string(), value.to_string()));
    }
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

pub fn config_digest(config_json: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::new();
    for b in digest.iter().take(8) {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

pub struct Provenance {
    pub command: String,
    pub seed: Option<u64>,
    pub config_digest: String,
}

pub fn render_csv(table: &Table, prov: &Provenance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schema=wqed-1");
    let _ = writeln!(out, "# command={}", prov.command);
    let _ = writeln!(out, "# git={}", git_hash());
    if let Some(seed) = prov.seed {
        let _ = writeln!(out, "# seed={seed}");
    }
    let _ = writeln!(out, "# config_sha256={}", prov.config_digest);
    for (k, v) in &table.meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "# timestamp={}", timestamp());
    let _ = writeln!(out, "{}", table.columns.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::render).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn render_json(table: &Table, prov: &Provenance) -> String {
    let rows: Vec<serde_json::Map<String, serde_json::Value>> = table
        .rows
        .iter()
        .map(|row| {
            table
                .columns
                .iter()
                .zip(row)
                .map(|(c, cell)| {
                    let v = match cell {
                        Cell::Num(x) => serde_json::json!(x),
                        Cell::Int(x) => serde_json::json!(x),
                        Cell::Text(s) => serde_json::json!(s),
                    };
                    (c.clone(), v)
                })
                .collect()
        })
        .collect();
    let meta: serde_json::Map<String, serde_json::Value> = table
        .meta
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::json!(v)))
        .collect();
    let doc = serde_json::json!({
        "schema": "wqed-1",
        "command": prov.command,
        "git": git_hash(),
        "seed": prov.seed,
        "config_sha256": prov.config_digest,
        "meta": meta,
        "columns": table.columns,
        "rows": rows,
    });
    serde_json::to_string_pretty(&doc).unwrap()
}

fn timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    format!("{}.{:09}", now.as_secs(), now.subsec_nanos())
}

pub fn write_table(
    table: &Table,
    prov: &Provenance,
    path: &Path,
    format: super::OutputFormat,
) -> Result<()> {
    match format {
        super::OutputFormat::Csv => std::fs::write(path, render_csv(table, prov))?,
        super::OutputFormat::Json => std::fs::write(path, render_json(table, prov))?,
        super::OutputFormat::Both => {
            std::fs::write(path, render_csv(table, prov))?;
            std::fs::write(path.with_extension("json"), render_json(table, prov))?;
        }
    }
    Ok(())
}
