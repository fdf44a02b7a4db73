//! Small file helpers shared by the record, dataset, checkpoint and report
//! writers. Every error carries the offending path.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

/// Formats a float with 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_string(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Numeric CSV table: a header plus rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a numeric CSV. `expected_header`, when given, must match exactly.
    /// Errors cite the 1-based line number of the offending row.
    pub fn parse(text: &str, expected_header: Option<&[&str]>, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::data(format!("{origin}: unreadable header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        if let Some(expected) = expected_header {
            if header.iter().map(String::as_str).ne(expected.iter().copied()) {
                return Err(Error::data(format!(
                    "{origin}: expected header `{}`, found `{}`",
                    expected.join(","),
                    header.join(",")
                )));
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::data(format!("{origin}: {e}")))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != header.len() {
                return Err(Error::data(format!(
                    "{origin}: line {line}: expected {} fields, found {}",
                    header.len(),
                    record.len()
                )));
            }
            let row = record
                .iter()
                .map(|cell| {
                    cell.parse::<f64>().map_err(|_| {
                        Error::data(format!("{origin}: line {line}: `{cell}` is not a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "{origin}: line {line}: non-finite value in column `{}`",
                    header[bad]
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[index]).collect()
    }
}
