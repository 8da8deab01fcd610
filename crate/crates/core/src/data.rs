//! CSV ingest and export of sampled paths.
//!
//! Layout: a header `t,X1,...,Xp`, then one row per grid point `t_i = t_0 + i h`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::quasi_lik::PathData;

/// Relative tolerance on the spacing of the time column.
pub const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("time grid is not uniform at line {line} (step {step}, expected {expected})")]
    NonUniformGrid { line: usize, step: f64, expected: f64 },
    #[error("need at least 3 rows (n >= 2), found {rows}")]
    TooFewRows { rows: usize },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a path from CSV. The step `h` is inferred as `(t_n - t_0) / n`.
pub fn read_csv<R: Read>(reader: R) -> Result<PathData, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(DataError::BadHeader(format!(
            "first column must be 't', found '{}'",
            header.get(0).unwrap_or("")
        )));
    }
    let p = header.len() - 1;
    if p == 0 {
        return Err(DataError::BadHeader("no observable columns".into()));
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |pos| pos.line() as usize);
        if rec.len() != p + 1 {
            return Err(DataError::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", p + 1, rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| DataError::MalformedRow {
                line,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::MalformedRow {
                    line,
                    message: format!("non-finite value '{field}'"),
                });
            }
            if j == 0 {
                times.push((v, line));
            } else {
                values.push(v);
            }
        }
    }
    let rows = times.len();
    if rows < 3 {
        return Err(DataError::TooFewRows { rows });
    }
    let n = rows - 1;
    let h = (times[n].0 - times[0].0) / n as f64;
    if !(h > 0.0) {
        return Err(DataError::NonUniformGrid {
            line: times[1].1,
            step: times[1].0 - times[0].0,
            expected: h,
        });
    }
    for w in times.windows(2) {
        let step = w[1].0 - w[0].0;
        // allow for the rounding of large time stamps as well
        let tol = (GRID_TOL * h).max(4.0 * f64::EPSILON * w[1].0.abs().max(w[0].0.abs()));
        if (step - h).abs() > tol {
            return Err(DataError::NonUniformGrid {
                line: w[1].1,
                step,
                expected: h,
            });
        }
    }
    let x = DMatrix::from_row_slice(rows, p, &values);
    PathData::new(h, x).map_err(|e| DataError::MalformedRow {
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_csv_file(path: &Path) -> Result<PathData, DataError> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes `t_i = i h` and the observations with 17 significant digits, so
/// that reading the file back reproduces every value exactly.
pub fn write_csv<W: Write>(path: &PathData, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let p = path.p();
    let mut header = vec!["t".to_string()];
    header.extend((1..=p).map(|j| format!("X{j}")));
    w.write_record(&header)?;
    let x = path.observations();
    let mut row = Vec::with_capacity(p + 1);
    for i in 0..x.nrows() {
        row.clear();
        row.push(format!("{:.16e}", i as f64 * path.h()));
        row.extend((0..p).map(|j| format!("{:.16e}", x[(i, j)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &PathData, file: &Path) -> Result<(), DataError> {
    write_csv(path, std::io::BufWriter::new(std::fs::File::create(file)?))
}
