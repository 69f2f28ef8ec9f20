use crate::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

pub fn digest(bytes: &[u8]) -> String {
  hex::encode(Sha256::digest(bytes))
}

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn format_float(x: f64) -> String {
  format!("{x:.16e}")
}

/// CSV bytes: header, LF line endings, every value in [`format_float`].
pub fn series_bytes(rows: &[Vec<f64>], schema: &[&str]) -> Result<Vec<u8>, CliError> {
  let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
  let io = |e: csv::Error| CliError::Io(e.to_string());
  w.write_record(schema).map_err(io)?;
  for (i, r) in rows.iter().enumerate() {
    if r.len() != schema.len() {
      return Err(CliError::Arity { row: i, got: r.len(), want: schema.len() });
    }
    w.write_record(r.iter().map(|x| format_float(*x))).map_err(io)?;
  }
  w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String, CliError> {
  std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
  Ok(digest(bytes))
}

/// Writes the series and returns its SHA-256 digest.
pub fn write_series(rows: &[Vec<f64>], schema: &[&str], path: &Path) -> Result<String, CliError> {
  write_file(path, &series_bytes(rows, schema)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<String, CliError> {
  let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
  bytes.push(b'\n');
  write_file(path, &bytes)
}

pub fn write_bytes(bytes: &[u8], path: &Path) -> Result<String, CliError> {
  write_file(path, bytes)
}
