//! Binary matrix files: magic `RBNO1\0`, u64 LE rows and columns, then
//! row-major f64 LE values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 6] = b"RBNO1\0";

pub fn write_matrix<W: Write>(mut w: W, m: &DenseMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.n_rows as u64).to_le_bytes())?;
    w.write_all(&(m.n_cols as u64).to_le_bytes())?;
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(|_| Error::Format("truncated header".into()))?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(|_| Error::Format("truncated header".into()))?;
    let cols = u64::from_le_bytes(word) as usize;
    let n = rows
        .checked_mul(cols)
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!("expected {} data bytes, found {}", n * 8, bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_matrix(BufReader::new(File::open(path)?))
}

/// Stores a vector as an `n x 1` matrix.
pub fn save_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    save_matrix(path, &DenseMatrix::from_vec(v.len(), 1, v.to_vec())?)
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = load_matrix(path)?;
    if m.n_cols != 1 && m.n_rows != 1 {
        return Err(Error::Format(format!("expected a vector, found {}x{}", m.n_rows, m.n_cols)));
    }
    Ok(m.data)
}
