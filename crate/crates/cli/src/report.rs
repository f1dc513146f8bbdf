//! Report documents: a summary map and named numeric tables, written as one
//! JSON document or as CSV plus a summary JSON.

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub summary: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            summary: BTreeMap::new(),
            tables: Vec::new(),
        }
    }

    pub fn note<V: Serialize>(&mut self, key: &str, value: V) {
        self.summary.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn header(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "summary": self.summary,
        })
    }

    /// The full document; keys are sorted.
    pub fn to_json(&self) -> Value {
        let mut doc = self.header();
        let tables: BTreeMap<&str, Value> = self
            .tables
            .iter()
            .map(|t| {
                (
                    t.name.as_str(),
                    json!({ "columns": t.columns, "rows": t.rows }),
                )
            })
            .collect();
        doc["tables"] = json!(tables);
        doc
    }

    pub fn summary_json(&self) -> Value {
        self.header()
    }

    pub fn write_csv<W: Write>(&self, table: &Table, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes according to the configured format and paths.
    pub fn emit(&self) -> CliResult<()> {
        let cfg = &self.config;
        match cfg.format {
            Format::Json => {
                let text = pretty(&self.to_json());
                write_to(cfg.out.as_deref(), text.as_bytes())
            }
            Format::Csv => {
                let table = match &cfg.table {
                    Some(name) => self
                        .table(name)
                        .ok_or_else(|| CliError::Usage(format!("no table named {name:?}")))?,
                    None => self
                        .tables
                        .first()
                        .ok_or_else(|| CliError::Usage("report has no tables".into()))?,
                };
                let mut buf = Vec::new();
                self.write_csv(table, &mut buf)?;
                write_to(cfg.out.as_deref(), &buf)?;
                let summary = pretty(&self.summary_json());
                match &cfg.summary {
                    Some(p) => write_to(Some(p), summary.as_bytes()),
                    None => {
                        eprintln!("{summary}");
                        Ok(())
                    }
                }
            }
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}
