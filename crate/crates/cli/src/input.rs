//! CSV ingestion and row selection.

use std::io::{Read, Write};
use std::path::Path;

use nibr_core::fatigue::FatigueRecord;
use nibr_core::{DMatrix, DVector, Dataset};

use crate::error::{CliError, CliResult};

/// Numeric CSV body under a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table<R: Read>(reader: R) -> CliResult<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(CliError::Parse { line: 1, message: "missing header row".into() }),
        Some(r) => r.map_err(csv_error)?,
    };
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(CliError::Parse { line: 1, message: "missing header row (first line is numeric)".into() });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .zip(&header)
            .map(|(cell, name)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Parse {
                    line,
                    message: format!("non-numeric cell {cell:?} in column {name:?}"),
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(NumericTable { header, rows })
}

fn csv_error(e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("ragged row: expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    CliError::Parse { line, message }
}

pub fn read_table_path(path: &Path) -> CliResult<NumericTable> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_table(file)
}

/// Regressor columns followed by the response in the last column.
pub fn regression_dataset(table: &NumericTable, intercept: bool) -> CliResult<Dataset> {
    let cols = table.header.len();
    if cols < 2 {
        return Err(CliError::Input(format!("need at least one regressor and a response column, found {cols} column(s)")));
    }
    let offset = usize::from(intercept);
    let k = cols - 1 + offset;
    let n = table.rows.len();
    let x = DMatrix::from_fn(n, k, |i, j| if j < offset { 1.0 } else { table.rows[i][j - offset] });
    let y = DVector::from_fn(n, |i, _| table.rows[i][cols - 1]);
    Ok(Dataset::new(x, y)?)
}

pub const FATIGUE_HEADER: [&str; 2] = ["strain_amplitude", "cycles"];

pub fn fatigue_records(table: &NumericTable) -> CliResult<Vec<FatigueRecord>> {
    if table.header != FATIGUE_HEADER {
        return Err(CliError::Parse {
            line: 1,
            message: format!("fatigue data needs header {:?}, found {:?}", FATIGUE_HEADER.join(","), table.header.join(",")),
        });
    }
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            FatigueRecord::new(r[0], r[1])
                .map_err(|e| CliError::Parse { line: i as u64 + 2, message: e.to_string() })
        })
        .collect()
}

/// Writes the design columns as `x1..xk` and the response as `y`, with
/// shortest round-trip number formatting.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.k()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    let to_err = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(&header).map_err(to_err)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.design().row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.response()[i].to_string());
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::Input(e.to_string()))
}

/// Parses 1-based indices and inclusive ranges (`1-6,8`) into sorted,
/// de-duplicated 0-based indices. An empty string selects nothing.
pub fn parse_index_list(text: &str, len: usize) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Config(format!("bad row selection {part:?}"));
        let (a, b) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<usize>().map_err(|_| bad())?, b.trim().parse::<usize>().map_err(|_| bad())?),
            None => {
                let v = part.parse::<usize>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if a == 0 || b < a || b > len {
            return Err(CliError::Config(format!("row selection {part:?} outside 1..={len}")));
        }
        out.extend(a - 1..b);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Prediction points `a,b;c,d` as rows of regressor values.
pub fn parse_points(text: &str) -> CliResult<Vec<Vec<f64>>> {
    text.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad prediction point {p:?}"))))
                .collect()
        })
        .collect()
}
