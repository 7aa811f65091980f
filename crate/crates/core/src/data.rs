//! The binary prediction matrix and its CSV representation.
//!
//! Predictions CSV: one row per instance, comma-separated `0`/`1` values, no
//! header. Lines starting with `#` and blank lines are skipped. Labels CSV:
//! one `0`/`1` per line under the same comment rule.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x d` matrix of binary classifier outputs, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<u8>,
}

impl PredictionMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<u8>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidData(format!(
                "prediction matrix must be non-empty, got {n_rows}x{n_cols}"
            )));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                operand: "prediction matrix values",
                expected: n_rows * n_cols,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidData(format!("non-binary entry {v}")));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_cols, values)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.values[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.values
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0usize; self.n_cols];
        for row in self.rows() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as usize;
            }
        }
        sums.into_iter()
            .map(|s| s as f64 / self.n_rows as f64)
            .collect()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.n_cols, values)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 2);
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str, source: &Path) -> Result<Self> {
        let mut values = Vec::new();
        let mut n_cols = None;
        let mut n_rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                path: source.to_path_buf(),
                line: lineno + 1,
                reason,
            };
            let mut count = 0;
            for field in line.split(',') {
                values.push(parse_bit(field.trim()).map_err(&parse_err)?);
                count += 1;
            }
            match n_cols {
                None => n_cols = Some(count),
                Some(c) if c != count => {
                    return Err(parse_err(format!("expected {c} fields, found {count}")));
                }
                _ => {}
            }
            n_rows += 1;
        }
        let n_cols = n_cols.ok_or_else(|| Error::Parse {
            path: source.to_path_buf(),
            line: 0,
            reason: "no data rows".into(),
        })?;
        Self::new(n_rows, n_cols, values)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

fn parse_bit(field: &str) -> std::result::Result<u8, String> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("expected 0 or 1, found {other:?}")),
    }
}

pub fn labels_to_csv_string(labels: &[u8]) -> String {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn parse_labels(text: &str, source: &Path) -> Result<Vec<u8>> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(parse_bit(line).map_err(|reason| Error::Parse {
            path: source.to_path_buf(),
            line: lineno + 1,
            reason,
        })?);
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, path)
}

pub fn write_labels(labels: &[u8], path: &Path) -> Result<()> {
    fs::write(path, labels_to_csv_string(labels)).map_err(|e| Error::io(path, e))
}
