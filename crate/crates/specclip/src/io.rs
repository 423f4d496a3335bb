//! Matrix file formats.
//!
//! Binary "DMAT1": 8-byte magic `SPECDMAT`, then rows and cols as u64
//! little-endian, then rows*cols f64 little-endian values in row-major
//! order. CSV: headerless comma-separated rows.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const DMAT_MAGIC: &[u8; 8] = b"SPECDMAT";

pub fn write_dmat(m: &DenseMatrix, w: &mut impl Write) -> Result<()> {
    w.write_all(DMAT_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for &x in m.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dmat(r: &mut impl Read) -> Result<DenseMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DMAT_MAGIC {
        return Err(Error::Parse("bad DMAT1 magic".into()));
    }
    let mut cnt = [0u8; 8];
    r.read_exact(&mut cnt)?;
    let rows = u64::from_le_bytes(cnt) as usize;
    r.read_exact(&mut cnt)?;
    let cols = u64::from_le_bytes(cnt) as usize;
    let total = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse("DMAT1 header overflow".into()))?;
    let mut data = Vec::with_capacity(total);
    let mut buf = [0u8; 8];
    for _ in 0..total {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_csv(m: &DenseMatrix, w: &mut impl Write) -> Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| format!("{x}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv(r: &mut impl Read) -> Result<DenseMatrix> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut rows = 0usize;
    let mut cols = 0usize;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if rows == 0 {
            cols = fields.len();
        } else if fields.len() != cols {
            return Err(Error::Parse(format!(
                "csv row {} has {} fields, expected {cols}",
                lineno + 1,
                fields.len()
            )));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("csv row {}: {e}", lineno + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    DenseMatrix::new(rows, cols, data)
}

/// Write a matrix choosing the format from the file extension
/// (`.csv` for CSV, anything else for DMAT1).
pub fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(m, &mut f)
    } else {
        write_dmat(m, &mut f)
    }
}

/// Read a matrix choosing the format from the file extension.
pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut f = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(&mut f)
    } else {
        read_dmat(&mut f)
    }
}
