//! Result records. JSON for single estimates, CSV for tables; both carry the
//! schema version, the master seed and the resolved config.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn json_record(command: &str, master_seed: u64, config: &Value, result: Value) -> String {
    let record = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "master_seed": master_seed,
        "config": config,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&record).expect("serializable");
    text.push('\n');
    text
}

/// A CSV document whose `#` preamble repeats what a JSON record would carry.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, command: &str, master_seed: u64, config: &Value) -> String {
        let mut out = format!(
            "# schema_version={SCHEMA_VERSION}\n# command={command}\n# master_seed={master_seed}\n# config={config}\n"
        );
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Write to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}
