//! Run reports: a JSON summary per command plus CSV series for plotting.
//!
//! CSV floats are printed with 17 significant digits so files round-trip
//! bit-exactly; the decimal separator is always `.`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Debug, Clone, Copy)]
pub enum Cell<'a> {
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(&'a str),
}

impl std::fmt::Display for Cell<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::UInt(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{}", format_float(*v)),
            Cell::Str(s) => write!(f, "{s}"),
        }
    }
}

/// 17 significant digits: enough to reconstruct the exact f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
    path: PathBuf,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<CsvWriter> {
        let file = File::create(path)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter {
            out,
            columns: header.len(),
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        assert_eq!(
            cells.len(),
            self.columns,
            "row width does not match the header of {}",
            self.path.display()
        );
        let mut line = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&c.to_string());
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("JSON encoding failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// The standard summary envelope every command emits: what ran, with
/// which resolved configuration, what it produced, and whether it passed.
#[allow(clippy::too_many_arguments)]
pub fn envelope(
    command: &str,
    seed: u64,
    threads: usize,
    resolved_config: &BTreeMap<String, String>,
    outputs: &[PathBuf],
    pass: Option<bool>,
    payload: Value,
) -> Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut v = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
        "seed": seed,
        "threads": threads,
        "mode": "serial",
        "config": resolved_config,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    if let Some(p) = pass {
        v["pass"] = json!(p);
    }
    if let Value::Object(ref mut map) = v {
        if let Value::Object(extra) = payload {
            for (k, val) in extra {
                map.insert(k, val);
            }
        }
    }
    v
}

/// Serialize any value into `serde_json::Value` (panics only on types
/// that cannot be represented, which none of ours are).
pub fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types are JSON-representable")
}
