//! Reading and writing data sets.
//!
//! Two formats are supported:
//!
//! * CSV, one observation per row, no header (a non-numeric first line is
//!   skipped as a header when reading).
//! * A raw little-endian binary: a 16-byte header made of the 8-byte magic
//!   `SPCADAT1`, `n` as `u32` and `p` as `u32`, followed by the `n * p`
//!   entries as `f64`, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::DataSet;

pub const BINARY_MAGIC: &[u8; 8] = b"SPCADAT1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Binary,
}

impl DataFormat {
    /// `.csv` selects CSV; anything else is treated as binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Binary,
        }
    }
}

pub fn read_data(path: &Path) -> Result<DataSet> {
    match DataFormat::from_path(path) {
        DataFormat::Csv => read_csv(path),
        DataFormat::Binary => read_binary(path),
    }
}

pub fn write_data(data: &DataSet, path: &Path) -> Result<()> {
    match DataFormat::from_path(path) {
        DataFormat::Csv => write_csv(data, path),
        DataFormat::Binary => write_binary(data, path),
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_csv(path: &Path) -> Result<DataSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(format_err(path, format!("line {}: {e}", line + 1))),
        };
        match p {
            None => p = Some(row.len()),
            Some(p) if p != row.len() => {
                return Err(format_err(
                    path,
                    format!("line {} has {} fields, expected {p}", line + 1, row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        n += 1;
    }
    let p = p.ok_or_else(|| format_err(path, "no data rows"))?;
    let rows = Array2::from_shape_vec((n, p), values).map_err(|e| format_err(path, e.to_string()))?;
    DataSet::new(rows, 0).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_csv(data: &DataSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for row in data.rows().rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| format_err(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_binary(path: &Path) -> Result<DataSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| format_err(path, "file shorter than the 16-byte header"))?;
    if &header[..8] != BINARY_MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let p = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != n * p * 8 {
        return Err(format_err(
            path,
            format!("expected {} bytes of data for {n}x{p}, found {}", n * p * 8, bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rows = Array2::from_shape_vec((n, p), values).map_err(|e| format_err(path, e.to_string()))?;
    DataSet::new(rows, 0).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_binary(data: &DataSet, path: &Path) -> Result<()> {
    let (n, p) = (data.n(), data.p());
    let n32 = u32::try_from(n).map_err(|_| Error::invalid("n does not fit the binary header"))?;
    let p32 = u32::try_from(p).map_err(|_| Error::invalid("p does not fit the binary header"))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(BINARY_MAGIC)?;
    write(&n32.to_le_bytes())?;
    write(&p32.to_le_bytes())?;
    for v in data.rows().iter() {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
