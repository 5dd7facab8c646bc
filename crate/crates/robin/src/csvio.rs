//! CSV in and out. Every file has a one-line header; floats are written
//! with 17 significant digits so they read back exactly.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// `{:.16e}`: 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| out_err(path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(file);
        writer.write_record(header).map_err(|e| out_err(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| out_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| out_err(&self.path, e))?;
        Ok(self.path)
    }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn in_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::InputFile {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads the named numeric columns of a headed CSV file.
pub fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| in_err(path, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| in_err(path, e.to_string()))?
        .clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| in_err(path, format!("missing column `{c}`")))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| in_err(path, e.to_string()))?;
        for (k, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field.trim().parse().map_err(|_| {
                in_err(
                    path,
                    format!("line {}: `{field}` is not a number", line + 2),
                )
            })?;
            out[k].push(v);
        }
    }
    Ok(out)
}
