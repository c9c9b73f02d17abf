//! CSV input and output.
//!
//! A cell is missing when, after trimming, it is empty or equals the NA token.
//! Values are written back with the shortest representation that parses to
//! the same `f64`.

use std::io::{Read, Write};
use std::path::Path;

use cpmiss::harness::EvalReport;

use crate::error::{internal_io, user_io, CliError, CliResult};

pub const DEFAULT_NA: &str = "NA";

/// Numeric table with optional cells and the file line of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

pub fn parse_cell(raw: &str, na_token: &str) -> Result<Option<f64>, String> {
    let s = raw.trim();
    if s.is_empty() || s == na_token.trim() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("cannot parse {s:?} as a number"))
}

/// Reads a headed numeric CSV. Every bad cell is reported with its line.
pub fn read_table_from<R: Read>(reader: R, na_token: &str, source: &str) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::User(format!("{source}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::User(format!("{source}: missing header row")));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut problems = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::User(format!("{source}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            problems.push(format!("line {line}: expected {} fields, found {}", headers.len(), record.len()));
            continue;
        }
        let mut row = Vec::with_capacity(headers.len());
        for (j, cell) in record.iter().enumerate() {
            match parse_cell(cell, na_token) {
                Ok(v) => row.push(v),
                Err(msg) => problems.push(format!("line {line}, column {}: {msg}", headers[j])),
            }
        }
        rows.push(row);
        lines.push(line);
    }
    if !problems.is_empty() {
        return Err(CliError::User(format!("{source}:\n  {}", problems.join("\n  "))));
    }
    Ok(Table { headers, rows, lines })
}

pub fn read_table(path: &Path, na_token: &str) -> CliResult<Table> {
    let file = std::fs::File::open(path).map_err(|e| user_io(path, e))?;
    read_table_from(file, na_token, &path.display().to_string())
}

pub fn write_table<W: Write>(out: W, table: &Table, na_token: &str) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Internal(format!("writing CSV: {e}"));
    w.write_record(&table.headers).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.map_or_else(|| na_token.to_string(), |x| x.to_string())))
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("writing CSV: {e}")))
}

/// Six decimals; infinities as `inf` and `-inf`.
pub fn fixed6(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.6}")
    }
}

pub const REPORT_COLUMNS: [&str; 6] = ["method", "group", "coverage", "mean_length", "n_points", "n_infinite"];

pub fn write_report_csv<W: Write>(out: W, report: &EvalReport) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Internal(format!("writing report: {e}"));
    w.write_record(REPORT_COLUMNS).map_err(io)?;
    for r in &report.rows {
        w.write_record([
            r.method.to_string(),
            r.group.clone(),
            fixed6(r.coverage),
            r.mean_length.map_or_else(|| "NA".to_string(), fixed6),
            r.n_points.to_string(),
            r.n_infinite.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("writing report: {e}")))
}

/// Creates `path` for writing, reporting failures as internal errors.
pub fn create(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| internal_io(path, e))
}
