//! Single-column CSV data files.
//!
//! One non-negative value per row, optionally preceded by a header row `x`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Parses a data file body; errors carry the 1-based line number.
pub fn parse_values<R: Read>(input: R) -> CliResult<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(row as u64 + 1, |p| p.line());
            CliError::Usage(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.len() != 1 {
            return Err(CliError::Usage(format!(
                "line {line}: expected one column, found {}",
                record.len()
            )));
        }
        let field = record[0].trim();
        if row == 0 && field == "x" {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Usage(format!("line {line}: '{field}' is not a number")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(CliError::Usage(format!(
                "line {line}: observations must be finite and non-negative, got {field}"
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Usage("no observations in input".into()));
    }
    Ok(values)
}

pub fn read_values(path: &Path) -> CliResult<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_values(std::io::BufReader::new(file)).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_values<W: Write>(out: W, values: &[f64]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["x"]).map_err(csv_err)?;
    for &v in values {
        w.write_record([fmt_f64(v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV writer with LF line endings.
pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(e.to_string())
}
