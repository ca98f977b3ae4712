//! Numeric CSV: comma separated, no header unless asked for, one row per
//! line, every field a finite decimal number.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use pai_core::Matrix;

use crate::error::{CliError, CliResult};

pub fn read_matrix(path: &Path, header: bool) -> CliResult<Matrix> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(file, header, &path.display().to_string())
}

/// Parses `reader`; `label` prefixes error positions (`label:line:column`).
pub fn parse_matrix<R: Read>(reader: R, header: bool, label: &str) -> CliResult<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(false)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Data(format!("{label}:{line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if cols.is_none() {
            cols = Some(record.len());
        }
        for (j, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() && !field.is_empty() && is_decimal(field) => data.push(v),
                _ => {
                    return Err(CliError::Data(format!(
                        "{label}:{line}:{}: '{field}' is not a finite decimal number",
                        j + 1
                    )))
                }
            }
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::Data(format!("{label}: no data rows")))?;
    Matrix::from_vec(rows, cols, data).map_err(|source| CliError::Core {
        context: label.to_string(),
        source,
    })
}

/// Digits, one optional sign, point and exponent; rejects `inf`, `nan` and padding.
fn is_decimal(field: &str) -> bool {
    field
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
}

pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_matrix<W: Write>(out: W, header: Option<&[String]>, m: &Matrix) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in m.iter_rows() {
        w.write_record(row.iter().map(|&v| format_value(v)))?;
    }
    w.flush()
}

pub fn write_matrix_file(path: &Path, m: &Matrix) -> CliResult<()> {
    log::debug!("writing {} x {} matrix to {}", m.rows(), m.cols(), path.display());
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_matrix(std::io::BufWriter::new(file), None, m).map_err(|e| CliError::io(path, e))
}
