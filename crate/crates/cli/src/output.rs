//! Module reports and the files they are written to.

use std::path::Path;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(id: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            id: id.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A CSV table; cells are already formatted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// What one module produces: checks, a JSON payload and CSV tables.
#[derive(Debug, Clone)]
pub struct ModuleOutput {
    pub module: String,
    pub checks: Vec<Check>,
    pub data: serde_json::Value,
    pub tables: Vec<Table>,
}

impl ModuleOutput {
    pub fn new(module: &str) -> Self {
        ModuleOutput {
            module: module.into(),
            checks: Vec::new(),
            data: serde_json::Value::Null,
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, id: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(id, passed, detail));
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id.clone())
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The `config_hash` and `seed` stamped on every file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    module: &'a str,
    config_hash: &'a str,
    seed: u64,
    passed: bool,
    checks: &'a [Check],
    data: &'a serde_json::Value,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("writing {}: {e}", path.display()))
}

pub fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(format!("serializing: {e}")))
}

pub fn write_json(dir: &Path, name: &str, stamp: &Stamp, value: &serde_json::Value) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("config_hash".into(), stamp.config_hash.clone().into());
    doc.insert("seed".into(), stamp.seed.into());
    doc.insert("data".into(), value.clone());
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

pub fn write_table(dir: &Path, stamp: &Stamp, table: &Table) -> Result<(), CliError> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut buf = format!("# config_hash={} seed={}\n", stamp.config_hash, stamp.seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header).map_err(|e| io_err(&path, e))?;
        for row in &table.rows {
            w.write_record(row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    std::fs::write(&path, buf).map_err(|e| io_err(&path, e))
}

/// Writes `<module>.json` and every table of `out`.
pub fn write_module(dir: &Path, stamp: &Stamp, out: &ModuleOutput) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let report = JsonReport {
        module: &out.module,
        config_hash: &stamp.config_hash,
        seed: stamp.seed,
        passed: out.passed(),
        checks: &out.checks,
        data: &out.data,
    };
    let path = dir.join(format!("{}.json", out.module));
    let text = serde_json::to_string_pretty(&report).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    for t in &out.tables {
        write_table(dir, stamp, t)?;
    }
    Ok(())
}

/// Shortest round-trip form of a float.
pub fn f(x: f64) -> String {
    format!("{x:?}")
}
