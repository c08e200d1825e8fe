//! CSV tables with a header row.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Table {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut flat = Vec::new();
        let mut rows = 0usize;
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            if record.len() != headers.len() {
                return Err(Error::parse(
                    path,
                    format!("row {} has {} fields", line + 1, record.len()),
                ));
            }
            for field in record.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, format!("row {}: not a number: {field:?}", line + 1)))?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        path,
                        format!("row {}: missing or non-finite value", line + 1),
                    ));
                }
                flat.push(v);
            }
            rows += 1;
        }
        Ok(Self {
            values: DMatrix::from_row_slice(rows, headers.len(), &flat),
            headers,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer.write_record(&self.headers).map_err(|e| csv_error(path, e))?;
        for row in self.values.row_iter() {
            writer
                .write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Drops the named column if present.
    pub fn without_column(&self, name: &str) -> Self {
        match self.column_index(name) {
            None => self.clone(),
            Some(j) => Self {
                headers: self.headers.iter().filter(|h| *h != name).cloned().collect(),
                values: self.values.clone().remove_column(j),
            },
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e)
    }
}
