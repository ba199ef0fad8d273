//! Path CSV: header `t,<p>1,...,<p>d`, one row per grid point in time order.
//! Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces the path bit for bit.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

use super::grid::TimeGrid;
use super::path::Path;

/// Column prefix used for the value columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathCsvKind {
    /// Controls: `x1..xd`.
    Control,
    /// Simulated or predicted trajectories: `y1..ym`.
    Trajectory,
    /// Feature rows: `f1..fK`.
    Features,
}

impl PathCsvKind {
    fn prefix(self) -> &'static str {
        match self {
            PathCsvKind::Control => "x",
            PathCsvKind::Trajectory => "y",
            PathCsvKind::Features => "f",
        }
    }
}

pub fn write_path_csv<W: Write>(path: &Path, kind: PathCsvKind, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(path.dim() + 1);
    header.push("t".to_string());
    header.extend((1..=path.dim()).map(|j| format!("{}{j}", kind.prefix())));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(path.dim() + 1);
    for (t, row) in path.times().iter().zip(path.rows()) {
        record.clear();
        record.push(t.to_string());
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a path CSV. The first column must be `t` and form a valid grid;
/// every other column is a path component regardless of its name.
pub fn read_path_csv<R: Read>(input: R) -> Result<Path> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::format("path CSV must start with a `t` column"));
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::format("path CSV has no value columns"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::format(format!("row {} has {} fields, expected {}", line + 1, record.len(), dim + 1)));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("row {}, column {}: `{field}` is not a number", line + 1, j)))?;
            if j == 0 {
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let grid = TimeGrid::new(times).map_err(|e| Error::format(format!("bad time column: {e}")))?;
    Path::new(Arc::new(grid), dim, values).map_err(|e| Error::format(e.to_string()))
}
