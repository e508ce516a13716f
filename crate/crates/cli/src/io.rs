//! Parameter lists in and CSV tables out.

use std::path::Path;

use pgp_core::pde::ParameterPoint;
use pgp_core::{Error, Result};

/// Reads a CSV of parameter points whose header must list exactly `names`,
/// in order.
pub fn read_thetas(path: &Path, names: &[String]) -> Result<Vec<ParameterPoint>> {
    let bad = |msg: String| Error::SchemaMismatch(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != names {
        return Err(bad(format!("header {header:?} does not match parameters {names:?}")));
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("row {}: `{t}` is not a number", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        points.push(ParameterPoint::new(names.iter().cloned(), values).map_err(|e| bad(e.to_string()))?);
    }
    if points.is_empty() {
        return Err(bad("no parameter rows".into()));
    }
    Ok(points)
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
