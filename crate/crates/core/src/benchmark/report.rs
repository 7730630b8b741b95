//! CSV reports: `records.csv` holds every replicate outcome, `summary.csv`
//! the per-cell aggregates. Floats are printed with 17 significant digits
//! and rows arrive pre-sorted by key, so identical runs produce identical
//! bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::benchmark::runner::BenchmarkResult;
use crate::error::Result;
use crate::io::format_float;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Writes `records.csv` and `summary.csv` under `dir`, creating it if
/// needed. Returns the two paths.
pub fn emit_results(result: &BenchmarkResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;

    let records_path = dir.join(RECORDS_FILE);
    let mut records = BufWriter::new(File::create(&records_path)?);
    writeln!(
        records,
        "model,distribution,p,estimator,replicate,frobenius_error"
    )?;
    for record in &result.records {
        writeln!(
            records,
            "{},{},{},{},{},{}",
            record.model,
            record.distribution,
            record.dim,
            record.estimator,
            record.replicate,
            format_float(record.error)
        )?;
    }
    records.flush()?;

    let summary_path = dir.join(SUMMARY_FILE);
    let mut summary = BufWriter::new(File::create(&summary_path)?);
    writeln!(summary, "model,distribution,p,estimator,median,q25,q75")?;
    for row in &result.summaries {
        writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            row.model,
            row.distribution,
            row.dim,
            row.estimator,
            format_float(row.median),
            format_float(row.q25),
            format_float(row.q75)
        )?;
    }
    summary.flush()?;

    Ok((records_path, summary_path))
}
