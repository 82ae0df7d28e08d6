//! CSV fallback for small hand-made fixtures.
//!
//! The first record is a header of column names. When the first field of the
//! first data row is not a number, the first column is taken as sentence IDs.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

pub fn parse_csv_matrix(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| csv_error(1, e))?
        .clone();

    let mut labels: Option<Vec<String>> = None;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(line, e))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if rows == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            labels = Some(Vec::new());
        }
        let mut fields = record.iter();
        if let Some(l) = labels.as_mut() {
            l.push(fields.next().unwrap_or_default().to_string());
        }
        let mut n = 0;
        for field in fields {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: rows, col: n });
            }
            data.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::Parse {
                    line,
                    message: format!("{n} values, expected {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let expected_cols = headers.len() - usize::from(labels.is_some());
    let cols = cols.unwrap_or(expected_cols);
    if cols != expected_cols {
        return Err(Error::Parse {
            line: 1,
            message: format!("header names {expected_cols} columns, rows have {cols}"),
        });
    }
    let m = Matrix::new(rows, cols, data)?;
    match labels {
        Some(l) => m.with_row_labels(l),
        None => Ok(m),
    }
}

pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_matrix(&text)
}

/// Writes `m` with a header `c0,c1,...` (prefixed by `id` when labelled).
pub fn write_csv_matrix(m: &Matrix, mut out: impl Write) -> std::io::Result<()> {
    let mut header: Vec<String> = (0..m.cols()).map(|c| format!("c{c}")).collect();
    if m.row_labels().is_some() {
        header.insert(0, "id".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for r in 0..m.rows() {
        let mut fields: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = m.row_labels() {
            fields.insert(0, l[r].clone());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    let line = e
        .position()
        .map_or(line, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
