//! Feature datasets as CSV: 20 feature columns, `target`, `scenario_id`.

use crate::error::{Error, Result};
use crate::regress::Dataset;
use crate::texture::FEATURE_NAMES;

pub const CSV_COLUMNS: usize = FEATURE_NAMES.len() + 2;

fn header() -> Vec<&'static str> {
    FEATURE_NAMES
        .iter()
        .copied()
        .chain(["target", "scenario_id"])
        .collect()
}

/// Values are written with 17 significant digits, enough to round-trip.
pub fn write_dataset_csv(ds: &Dataset) -> Result<Vec<u8>> {
    if ds.n_features() != FEATURE_NAMES.len() {
        return Err(Error::Domain(format!(
            "dataset has {} features, the CSV layout needs {}",
            ds.n_features(),
            FEATURE_NAMES.len()
        )));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fmt_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header()).map_err(fmt_err)?;
    for ((row, y), id) in ds.x.iter().zip(&ds.y).zip(&ds.ids) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        rec.push(format!("{y:.16e}"));
        rec.push(id.clone());
        w.write_record(&rec).map_err(fmt_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_dataset_csv(bytes: &[u8]) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let head = r
        .headers()
        .map_err(|e| Error::Format(format!("line 1: {e}")))?;
    if head.len() != CSV_COLUMNS || head.iter().ne(header()) {
        return Err(Error::Format(format!(
            "line 1: expected {CSV_COLUMNS} columns named {}, got {:?}",
            header().join(","),
            head.iter().collect::<Vec<_>>()
        )));
    }
    let (mut x, mut y, mut ids) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        if rec.len() != CSV_COLUMNS {
            return Err(Error::Format(format!(
                "line {line}: {} columns, expected {CSV_COLUMNS}",
                rec.len()
            )));
        }
        let mut vals = Vec::with_capacity(CSV_COLUMNS - 1);
        for (col, cell) in rec.iter().take(CSV_COLUMNS - 1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "line {line}, column {}: not a number: {cell:?}",
                    header()[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "line {line}, column {}: non-finite value",
                    header()[col]
                )));
            }
            vals.push(v);
        }
        y.push(vals.pop().expect("target column"));
        x.push(vals);
        ids.push(rec[CSV_COLUMNS - 1].to_string());
    }
    Dataset::new(x, y, ids).map_err(|e| Error::Format(e.to_string()))
}
