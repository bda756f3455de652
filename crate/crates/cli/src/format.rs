//! Matrix and tensor file formats.
//!
//! Binary layout: magic bytes `CNMF1\n`, then unsigned 64-bit little-endian
//! integers (ndim, followed by ndim dimension sizes, ndim in {2, 3}), then
//! the values row-major (last index fastest) as 64-bit little-endian
//! IEEE-754. A CSV alternative (comma-separated, no header, one matrix row
//! per line) is used for 2-D files with a `.csv` extension.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 6] = b"CNMF1\n";

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Write to a temporary sibling then rename, so readers never observe a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_binary(path: &Path, dims: &[u64], values: impl Iterator<Item = f64>) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(CliError::InvalidInput("zero-size dimension".into()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &buf)
}

fn read_header(reader: &mut impl Read, path: &Path) -> Result<Vec<usize>> {
    let mut magic = [0u8; 6];
    reader
        .read_exact(&mut magic)
        .map_err(|_| CliError::Malformed(format!("{}: missing magic", path.display())))?;
    if &magic != MAGIC {
        return Err(CliError::Malformed(format!("{}: bad magic bytes", path.display())));
    }
    let mut word = [0u8; 8];
    reader
        .read_exact(&mut word)
        .map_err(|_| CliError::Malformed(format!("{}: truncated header", path.display())))?;
    let ndim = u64::from_le_bytes(word);
    if !(2..=3).contains(&ndim) {
        return Err(CliError::Malformed(format!("{}: ndim {ndim} not in {{2,3}}", path.display())));
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    for _ in 0..ndim {
        reader
            .read_exact(&mut word)
            .map_err(|_| CliError::Malformed(format!("{}: truncated header", path.display())))?;
        let d = u64::from_le_bytes(word);
        if d == 0 || d > usize::MAX as u64 {
            return Err(CliError::Malformed(format!("{}: bad dimension {d}", path.display())));
        }
        dims.push(d as usize);
    }
    Ok(dims)
}

fn read_payload(reader: &mut impl Read, count: usize, path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(CliError::Malformed(format!(
            "{}: payload has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            count * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    if is_csv(path) {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(CliError::InvalidInput("zero-size dimension".into()));
        }
        let mut out = String::new();
        for row in m.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        return atomic_write(path, out.as_bytes());
    }
    write_binary(path, &[m.nrows() as u64, m.ncols() as u64], m.iter().copied())
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    if is_csv(path) {
        return read_matrix_csv(path);
    }
    let mut reader = BufReader::new(File::open(path)?);
    let dims = read_header(&mut reader, path)?;
    if dims.len() != 2 {
        return Err(CliError::Malformed(format!(
            "{}: expected a 2-D file, found ndim {}",
            path.display(),
            dims.len()
        )));
    }
    let values = read_payload(&mut reader, dims[0] * dims[1], path)?;
    Array2::from_shape_vec((dims[0], dims[1]), values)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            CliError::Malformed(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Malformed(format!(
                    "{}:{}: ragged row ({} fields, expected {})",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Malformed(format!("{}: empty csv", path.display())));
    }
    let ncols = rows[0].len();
    let flat: Vec<f64> = rows.concat();
    Array2::from_shape_vec((flat.len() / ncols, ncols), flat)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

pub fn write_tensor(path: &Path, t: &Array3<f64>) -> Result<()> {
    let (a, b, c) = t.dim();
    write_binary(path, &[a as u64, b as u64, c as u64], t.iter().copied())
}

pub fn read_tensor(path: &Path) -> Result<Array3<f64>> {
    let mut reader = BufReader::new(File::open(path)?);
    let dims = read_header(&mut reader, path)?;
    if dims.len() != 3 {
        return Err(CliError::Malformed(format!(
            "{}: expected a 3-D file, found ndim {}",
            path.display(),
            dims.len()
        )));
    }
    let values = read_payload(&mut reader, dims[0] * dims[1] * dims[2], path)?;
    Array3::from_shape_vec((dims[0], dims[1], dims[2]), values)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

/// Trace CSV: header `iteration,elapsed_s,loss`, loss printed with 17
/// significant digits so 64-bit values round-trip losslessly. With
/// `no_timing` the iteration index is written in place of wall-clock time,
/// making outputs byte-comparable across runs.
pub fn write_trace(path: &Path, trace: &cnmf_core::FitTrace, no_timing: bool) -> Result<()> {
    let mut out = String::from("iteration,elapsed_s,loss\n");
    for r in &trace.records {
        if no_timing {
            out.push_str(&format!("{},{},{:.16e}\n", r.iteration, r.iteration, r.loss));
        } else {
            out.push_str(&format!("{},{:.9},{:.16e}\n", r.iteration, r.elapsed_s, r.loss));
        }
    }
    atomic_write(path, out.as_bytes())
}
