use std::fs::File;
use std::io::Write;
use std::path::Path;

use iwar_core::iwar::VarPath;
use iwar_core::matcore::Vector;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A numeric series read from a CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vector>,
}

pub fn read_series(path: &Path) -> CliResult<Series> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: unreadable header: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{}: missing header row", path.display())));
    }
    let q = columns.len();
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != q {
            return Err(CliError::Data(format!(
                "{}: row {row}: expected {q} columns, found {}",
                path.display(),
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(q);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: row {row}, column {} ({}): invalid number {cell:?}",
                    path.display(),
                    j + 1,
                    columns[j]
                ))
            })?;
            values.push(v);
        }
        rows.push(Vector::from_vec(values));
    }
    Ok(Series { columns, rows })
}

fn create(path: &Path) -> CliResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_rows<I>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn series_header(q: usize) -> Vec<String> {
    (1..=q).map(|i| format!("x{i}")).collect()
}

pub fn write_series(path: &Path, q: usize, rows: &[Vector]) -> CliResult<()> {
    write_rows(path, &series_header(q), rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()))
}

/// Long format `t, i, j, value` over the upper triangle, 1-based `i <= j`.
pub fn write_path(path: &Path, vp: &VarPath) -> CliResult<()> {
    let header: Vec<String> = ["t", "i", "j", "value"].iter().map(|s| s.to_string()).collect();
    let q = vp.dim();
    let start = vp.start_index();
    let rows = vp.iter().enumerate().flat_map(move |(k, m)| {
        (0..q).flat_map(move |i| {
            (i..q).map(move |j| vec![(start + k).to_string(), (i + 1).to_string(), (j + 1).to_string(), m[(i, j)].to_string()])
        })
    });
    write_rows(path, &header, rows)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    file.write_all(text.as_bytes()).and_then(|_| file.write_all(b"\n")).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = p * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Mean and central 95% interval.
pub fn summarize(values: &mut [f64]) -> (f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, quantile(values, 0.025), quantile(values, 0.975))
}
