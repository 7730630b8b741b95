//! CSV input and output for data matrices and covariance estimates.
//!
//! Data files are UTF-8, comma-separated, `.` decimal: rows are samples,
//! columns are features, and the first line is a header of feature names.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{DataMatrix, SymmetricMatrix};

/// Reads a data CSV; returns the feature names and the matrix. Malformed
/// rows are reported with their 1-based line number.
pub fn read_data_csv(path: &Path) -> Result<(Vec<String>, DataMatrix)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if names.len() < 2 {
        return Err(Error::DataFormat {
            line: 1,
            message: format!("need at least 2 feature columns, found {}", names.len()),
        });
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != names.len() {
            return Err(Error::DataFormat {
                line,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for field in record.iter() {
            let value: f64 = field.trim().parse().map_err(|_| Error::DataFormat {
                line,
                message: format!("'{field}' is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::DataFormat {
                    line,
                    message: format!("non-finite value '{field}'"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "{} has {} data rows; need at least 2",
            path.display(),
            rows.len()
        )));
    }
    let matrix = DataMatrix::from_rows(&rows)?;
    Ok((names, matrix))
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::DataFormat {
            line: pos.line(),
            message: e.to_string(),
        },
        None => Error::Config(e.to_string()),
    }
}

/// Formats a float with 17 significant digits; round-trips exactly.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Writes a symmetric matrix as a dense p x p CSV with the given header.
pub fn write_symmetric_csv(
    matrix: &SymmetricMatrix,
    names: &[String],
    path: &Path,
) -> Result<()> {
    let p = matrix.dim();
    if names.len() != p {
        return Err(Error::invalid(format!(
            "{} names for a {p}x{p} matrix",
            names.len()
        )));
    }
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "{}", names.join(","))?;
    for j in 0..p {
        let row: Vec<String> = (0..p).map(|k| format_float(matrix.get(j, k))).collect();
        writeln!(writer, "{}", row.join(","))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads back a matrix written by `write_symmetric_csv`.
pub fn read_symmetric_csv(path: &Path) -> Result<(Vec<String>, SymmetricMatrix)> {
    let (names, data) = read_data_csv(path)?;
    let p = names.len();
    if data.n_samples() != p {
        return Err(Error::invalid(format!(
            "{} is {}x{p}, not square",
            path.display(),
            data.n_samples()
        )));
    }
    let dense: Array2<f64> = data.values().clone();
    Ok((names, SymmetricMatrix::from_dense(&dense)?))
}

/// Default feature names `x1..xp` for matrices without a source header.
pub fn default_feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}
