//! Numeric formatting and small file helpers shared by the report writers.

use std::path::Path;

use crate::error::{Error, Result};

/// Decimal scientific notation with 9 significant digits, `.` radix.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes a CSV from a header and pre-formatted rows.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
