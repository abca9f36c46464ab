//! Machine-readable run results: labeled tables plus metadata, emitted as
//! comma-separated text and as a single structured JSON document.
//!
//! Output is byte-stable: identical configuration and seed produce identical
//! files. Nothing time- or environment-dependent is written.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("failed to write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// One table cell. Integers and numbers render with Rust's shortest
/// round-trip formatting; text is quoted in CSV only when it needs to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Integer(i64),
    Number(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Integer(v) => write!(f, "{v}"),
            Cell::Number(v) => write!(f, "{v}"),
            Cell::Text(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Integer(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A labeled result table; column names carry their units
/// (e.g. `detuning_khz`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    /// Fully resolved configuration (defaults applied), as a TOML document.
    pub config_echo: String,
}

/// Complete result of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// Comma-separated tables only.
    Csv,
    /// Single JSON document only.
    Structured,
    /// Both variants.
    Both,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "structured" => Ok(OutputFormat::Structured),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format `{other}` (expected csv, structured, or both)")),
        }
    }
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), EmitError> {
    let mut file = fs::File::create(path)
        .map_err(|source| EmitError::Io { path: path.to_path_buf(), source })?;
    file.write_all(contents)
        .map_err(|source| EmitError::Io { path: path.to_path_buf(), source })
}

/// Write the run to `dir`, returning the paths created.
///
/// Always writes `config_echo.toml`; writes one `<table>.csv` per table
/// unless the format is structured-only, and `run.json` unless the format is
/// CSV-only.
pub fn emit(output: &RunOutput, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();

    let echo_path = dir.join("config_echo.toml");
    write_file(&echo_path, output.metadata.config_echo.as_bytes())?;
    written.push(echo_path);

    if format != OutputFormat::Structured {
        for table in &output.tables {
            let mut text = String::new();
            text.push_str(&table.columns.join(","));
            text.push('\n');
            for row in &table.rows {
                let line: Vec<String> =
                    row.iter().map(|cell| csv_field(&cell.to_string())).collect();
                text.push_str(&line.join(","));
                text.push('\n');
            }
            let path = dir.join(format!("{}.csv", table.name));
            write_file(&path, text.as_bytes())?;
            written.push(path);
        }
    }

    if format != OutputFormat::Csv {
        let json = serde_json::to_string_pretty(output).expect("run output serializes");
        let path = dir.join("run.json");
        write_file(&path, json.as_bytes())?;
        written.push(path);
    }

    Ok(written)
}
