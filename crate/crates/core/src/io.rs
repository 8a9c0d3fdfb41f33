//! Reading curves and responses from delimited text, writing results.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::direction::DirectionValue;
use crate::error::{Error, Result};
use crate::funcspace::{Curve, Grid};
use crate::scalar::Scalar;

/// A rectangular numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<T>>,
}

impl<T> Table<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(',') {
        b','
    } else if first.contains(';') {
        b';'
    } else if first.contains('\t') {
        b'\t'
    } else {
        b' '
    }
}

/// Parses a comma, semicolon, tab or single-space separated table. A first
/// row holding any non-numeric cell is taken as a header. Blank lines are skipped.
pub fn parse_table<T: Scalar>(text: &str) -> Result<Table<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .delimiter(sniff_delimiter(text))
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<T>> = record
            .iter()
            .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()).map(T::lit))
            .collect();
        if rows.is_empty() && header.is_none() && parsed.iter().any(Option::is_none) {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        if let Some(col) = parsed.iter().position(Option::is_none) {
            return Err(Error::Parse {
                line,
                column: col + 1,
                message: format!("non-numeric cell '{}'", &record[col]),
            });
        }
        let width = rows
            .first()
            .map(Vec::len)
            .or_else(|| header.as_ref().map(Vec::len));
        if let Some(w) = width {
            if parsed.len() != w {
                return Err(Error::Parse {
                    line,
                    column: parsed.len().min(w) + 1,
                    message: format!("row has {} cells, expected {w}", parsed.len()),
                });
            }
        }
        rows.push(parsed.into_iter().map(Option::unwrap).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            column: 0,
            message: "no numeric rows".into(),
        });
    }
    Ok(Table { header, rows })
}

pub fn read_table<T: Scalar>(path: &Path) -> Result<Table<T>> {
    let mut text = String::new();
    BufReader::new(File::open(path).map_err(|e| io_error(path, e))?)
        .read_to_string(&mut text)
        .map_err(|e| io_error(path, e))?;
    parse_table(&text)
}

/// Curves from a table with one curve per row. The columns are mapped onto a
/// uniform grid of [0,1], or onto the abscissae in `grid` (one value per cell,
/// any layout) when given, which must be uniformly spaced.
pub fn curves_from_table<T: Scalar>(table: &Table<T>, grid: Option<&[T]>) -> Result<Vec<Curve<T>>> {
    let g = table.n_cols();
    let grid = match grid {
        Some(abscissae) => {
            if abscissae.len() != g {
                return Err(Error::LengthMismatch {
                    expected: g,
                    got: abscissae.len(),
                });
            }
            Grid::from_abscissae(abscissae)?
        }
        None => Grid::uniform(g)?,
    };
    let grid = Arc::new(grid);
    table
        .rows
        .iter()
        .map(|r| Curve::new(grid.clone(), r.clone()))
        .collect()
}

/// Reads curves from `path`, with optional abscissae from `grid_path`.
pub fn ingest_curves<T: Scalar>(path: &Path, grid_path: Option<&Path>) -> Result<Vec<Curve<T>>> {
    let table = read_table(path)?;
    let abscissae = match grid_path {
        Some(p) => Some(read_table::<T>(p)?.rows.concat()),
        None => None,
    };
    curves_from_table(&table, abscissae.as_deref())
}

/// One column (0-based) of a table file.
pub fn read_response<T: Scalar>(path: &Path, column: usize) -> Result<Vec<T>> {
    let table = read_table::<T>(path)?;
    if column >= table.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "response column {} requested but {} has {} columns",
            column + 1,
            path.display(),
            table.n_cols()
        )));
    }
    Ok(table.rows.iter().map(|r| r[column]).collect())
}

/// Pretty JSON, newline terminated.
pub fn write_json<W: Write, V: Serialize>(mut out: W, value: &V) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    writeln!(out).map_err(|e| Error::Io {
        path: "<output>".into(),
        source: e,
    })
}

/// Per-direction diagnostics with columns `h,refined,gamma_1..gamma_p,q_n,variance,standardized`.
pub fn write_direction_values<W: Write, T: Scalar>(
    out: W,
    h: T,
    values: &[DirectionValue<T>],
    include_header: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = values.first().map_or(0, |v| v.gamma.len());
    let err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    if include_header {
        let mut head = vec!["h".to_string(), "refined".to_string()];
        head.extend((1..=p).map(|j| format!("gamma_{j}")));
        head.extend(["q_n", "variance", "standardized"].map(String::from));
        w.write_record(&head).map_err(err)?;
    }
    for v in values {
        let mut rec = vec![h.to_string(), v.refined.to_string()];
        rec.extend(v.gamma.iter().map(|g| g.to_string()));
        rec.push(v.q_n.to_string());
        rec.push(v.variance.to_string());
        rec.push(v.standardized.map_or_else(String::new, |s| s.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<diagnostics>".into(),
        source: e,
    })
}
