//! CSV tables and JSON reports. Every file starts with the tool version,
//! the config digest and the seed, and nothing in it depends on the clock.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    fn csv_header(&self) -> String {
        format!(
            "# dsrn {}\n# command {}\n# config_sha256 {}\n# seed {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_sha256,
            self.seed
        )
    }

    fn json_fields(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("tool".into(), json!("dsrn"));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), json!(self.command));
        m.insert("config_sha256".into(), json!(self.config_sha256));
        m.insert("seed".into(), json!(self.seed));
        m
    }
}

/// One table cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// A table with flat columns. `pairs` names column stems that hold a
/// complex number as `<stem>_re`, `<stem>_im`; JSON joins them into
/// two-element arrays.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub pairs: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

fn csv_error(e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("writing CSV: {e}"))
}

pub fn render_table(table: &Table, fmt: Format, prov: &Provenance) -> Result<Vec<u8>, CliError> {
    match fmt {
        Format::Csv => {
            let mut out = prov.csv_header().into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&table.columns).map_err(csv_error)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(csv_error)?;
                }
                w.flush().map_err(csv_error)?;
            }
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    let mut k = 0;
                    while k < row.len() {
                        let col = table.columns[k];
                        let stem = col.strip_suffix("_re").filter(|s| table.pairs.contains(s));
                        match stem {
                            Some(stem) if k + 1 < row.len() => {
                                m.insert(stem.into(), json!([row[k].json(), row[k + 1].json()]));
                                k += 2;
                            }
                            _ => {
                                m.insert(col.into(), row[k].json());
                                k += 1;
                            }
                        }
                    }
                    Value::Object(m)
                })
                .collect();
            let mut doc = prov.json_fields();
            doc.insert("rows".into(), Value::Array(rows));
            json_bytes(&Value::Object(doc))
        }
    }
}

pub fn render_report(report: Value, fmt: Format, prov: &Provenance) -> Result<Vec<u8>, CliError> {
    match fmt {
        Format::Json => {
            let mut doc = prov.json_fields();
            doc.insert("report".into(), report);
            json_bytes(&Value::Object(doc))
        }
        Format::Csv => {
            let mut flat = Vec::new();
            flatten("", &report, &mut flat);
            let mut out = prov.csv_header().into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(["key", "value"]).map_err(csv_error)?;
                for (k, v) in flat {
                    w.write_record([k, v]).map_err(csv_error)?;
                }
                w.flush().map_err(csv_error)?;
            }
            Ok(out)
        }
    }
}

fn json_bytes(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(format!("writing JSON: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Dotted keys in document order.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes).and_then(|_| so.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
