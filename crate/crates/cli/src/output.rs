//! CSV and JSON emission. Every file carries the resolved configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{io_err, CliResult};

/// UTF-8 CSV whose first line is `# config=<compact JSON>`.
pub fn write_csv(path: &Path, provenance: &Value, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut file = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(file, "# config={}", serde_json::to_string(provenance)?).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Reads a CSV written by [`write_csv`], returning the provenance and the
/// records keyed by header.
pub fn read_csv(path: &Path) -> CliResult<(Value, Vec<std::collections::BTreeMap<String, String>>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let provenance = match first.strip_prefix("# config=") {
        Some(json) => serde_json::from_str(json)?,
        None => Value::Null,
    };
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        out.push(header.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
    }
    Ok((provenance, out))
}

/// Shortest representation that round-trips exactly.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.csv");
        let prov = serde_json::json!({"seed": 3, "grid": [1, 2]});
        write_csv(&path, &prov, &["x", "y"], &[vec![num(0.1), "a,b".into()]]).unwrap();
        let (p, rows) = read_csv(&path).unwrap();
        assert_eq!(p, prov);
        assert_eq!(rows[0]["x"].parse::<f64>().unwrap(), 0.1);
        assert_eq!(rows[0]["y"], "a,b");
    }

    #[test]
    fn single_value_has_zero_std() {
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
