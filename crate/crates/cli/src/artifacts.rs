//! CSV output, cache keys and row-matrix helpers.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rbno_core::linalg::DenseMatrix;
use rbno_core::rom::ReducedWeights;
use rbno_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes `header` and one record per row; an empty `rows` gives a
/// header-only file.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header).map_err(std::io::Error::from)?;
    for row in rows {
        w.serialize(row).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Short content hash of a serializable value.
pub fn cache_key<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("cache key serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One row per vector.
pub fn rows_to_matrix(rows: &[Vec<f64>], n_cols: usize) -> Result<DenseMatrix> {
    let mut data = Vec::with_capacity(rows.len() * n_cols);
    for r in rows {
        if r.len() != n_cols {
            return Err(Error::Internal("ragged rows".into()));
        }
        data.extend_from_slice(r);
    }
    DenseMatrix::from_vec(rows.len(), n_cols, data)
}

pub fn matrix_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.n_rows).map(|i| m.row(i).to_vec()).collect()
}

/// Packs reduced weights as rows `[W (r²), α (r), β]`.
pub fn pack_weights(weights: &[ReducedWeights]) -> Result<DenseMatrix> {
    let r = weights.first().map_or(0, |w| w.rank());
    let rows: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| w.w.iter().chain(&w.alpha).copied().chain([w.beta]).collect())
        .collect();
    rows_to_matrix(&rows, r * r + r + 1)
}

pub fn unpack_weights(m: &DenseMatrix, seeds: &[u64]) -> Result<Vec<ReducedWeights>> {
    let r = (((4 * m.n_cols) as f64).sqrt() as usize).saturating_sub(1) / 2;
    if r * r + r + 1 != m.n_cols || m.n_rows != seeds.len() {
        return Err(Error::Format("reduced weight cache has the wrong shape".into()));
    }
    Ok((0..m.n_rows)
        .map(|i| {
            let row = m.row(i);
            ReducedWeights {
                w: row[..r * r].to_vec(),
                alpha: row[r * r..r * r + r].to_vec(),
                beta: row[r * r + r],
                seed: seeds[i],
            }
        })
        .collect())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, _) = mean_std(&lx);
    let (my, _) = mean_std(&ly);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
