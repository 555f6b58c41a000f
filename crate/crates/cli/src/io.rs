//! CSV ingest and emit.
//!
//! Datasets use a header `x1,...,xd,y` with the label in the last column
//! (0 = inlier, 1 = outlier; class ids for multi-class data). Result tables
//! are written through serde with fixed headers.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::Serialize;

use conforma_core::dataset::{Dataset, Label};
use conforma_core::tcv::MultiClassData;

use crate::error::{CliError, Result};

fn header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).chain(std::iter::once("y".into())).collect()
}

fn write_table<W: Write>(w: W, d: usize, rows: impl Iterator<Item = (Vec<f64>, usize)>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(d))?;
    for (x, y) in rows {
        out.write_record(x.iter().map(|v| v.to_string()).chain(std::iter::once(y.to_string())))?;
    }
    out.flush()?;
    Ok(())
}

fn read_table<R: Read>(r: R) -> Result<(usize, Vec<(Vec<f64>, usize)>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let head = rdr.headers()?.clone();
    if head.is_empty() || head.iter().next_back() != Some("y") {
        return Err(CliError::config("dataset header must end with a `y` column"));
    }
    let d = head.len() - 1;
    for (j, h) in head.iter().take(d).enumerate() {
        if h != format!("x{}", j + 1) {
            return Err(CliError::config(format!("unexpected column {h:?}, expected x{}", j + 1)));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("row {}: invalid number {s:?}", line + 1)))
        };
        let x = rec.iter().take(d).map(parse).collect::<Result<Vec<f64>>>()?;
        let y = rec[d]
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::config(format!("row {}: invalid label {:?}", line + 1, &rec[d])))?;
        rows.push((x, y));
    }
    Ok((d, rows))
}

pub fn write_dataset<W: Write>(w: W, data: &Dataset) -> Result<()> {
    write_table(w, data.dim(), (0..data.len()).map(|i| (data.row(i).to_vec(), data.label(i).as_u8() as usize)))
}

pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let (d, rows) = read_table(r)?;
    let mut data = Dataset::empty(d)?;
    for (i, (x, y)) in rows.into_iter().enumerate() {
        let label = u8::try_from(y)
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| CliError::config(format!("row {}: label must be 0 or 1", i + 1)))?;
        data.push(&x, label)?;
    }
    Ok(data)
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset(File::create(path)?, data)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    read_dataset(f)
}

pub fn write_multiclass<W: Write>(w: W, data: &MultiClassData) -> Result<()> {
    let d = data.rows().first().map_or(0, Vec::len);
    write_table(w, d, data.rows().iter().cloned().zip(data.labels().iter().copied()))
}

pub fn read_multiclass<R: Read>(r: R, n_classes: usize) -> Result<MultiClassData> {
    let (_, rows) = read_table(r)?;
    let (x, y) = rows.into_iter().unzip();
    Ok(MultiClassData::new(x, y, n_classes)?)
}

/// Serialize rows with their serde header to `path`, or stdout when absent.
pub fn write_rows<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<()> {
    match path {
        Some(p) => emit(File::create(p)?, rows),
        None => emit(io::stdout().lock(), rows),
    }
}

pub fn emit<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: serde::de::DeserializeOwned>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|r| r.map_err(CliError::from)).collect()
}
