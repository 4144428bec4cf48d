use crate::error::{check_dim, Result};

use super::DenseMatrix;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n_rows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // Stable sort keeps duplicate sums independent of thread timing.
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Structure-only matrix (zero values) whose row `i` holds `cols[i]`, sorted and deduplicated.
    pub fn from_pattern(n_cols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Position of entry `(i, j)` in `values`, if stored.
    #[inline]
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("spmv operand", self.n_cols, x.len())?;
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks beyond debug assertions.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_rows {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * x[self.col_idx[k]];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                trip.push((self.col_idx[k], i, self.values[k]));
            }
        }
        CsrMatrix::from_triplets(self.n_cols, self.n_rows, &trip)
    }

    /// Largest entrywise deviation `|A - Aᵀ|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Keeps the rows and columns whose index maps to `Some(new_index)`.
    pub fn restrict(&self, rows: &[Option<usize>], n_new_rows: usize, cols: &[Option<usize>], n_new_cols: usize) -> CsrMatrix {
        let mut row_ptr = vec![0usize; n_new_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut order: Vec<(usize, usize)> = rows
            .iter()
            .enumerate()
            .filter_map(|(old, new)| new.map(|n| (n, old)))
            .collect();
        order.sort_unstable();
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for (n, old) in order {
            scratch.clear();
            for k in self.row_ptr[old]..self.row_ptr[old + 1] {
                if let Some(c) = cols[self.col_idx[k]] {
                    scratch.push((c, self.values[k]));
                }
            }
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[n + 1] = col_idx.len();
        }
        for i in 0..n_new_rows {
            row_ptr[i + 1] = row_ptr[i + 1].max(row_ptr[i]);
        }
        CsrMatrix {
            n_rows: n_new_rows,
            n_cols: n_new_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `A B` for a dense `B`.
    pub fn mul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("sparse-dense product", self.n_cols, b.n_rows)?;
        let m = b.n_cols;
        let mut out = DenseMatrix::zeros(self.n_rows, m);
        for i in 0..self.n_rows {
            let row = &mut out.data[i * m..(i + 1) * m];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[k];
                let src = &b.data[self.col_idx[k] * m..(self.col_idx[k] + 1) * m];
                for (r, s) in row.iter_mut().zip(src) {
                    *r += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.col_idx[k])] += self.values[k];
            }
        }
        d
    }

    /// `self + scale * other` on matching shapes.
    pub fn add_scaled(&self, scale: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        check_dim("matrix rows", self.n_rows, other.n_rows)?;
        check_dim("matrix cols", self.n_cols, other.n_cols)?;
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, 1.0), (other, scale)] {
            for i in 0..m.n_rows {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    trip.push((i, m.col_idx[k], s * m.values[k]));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.n_rows, self.n_cols, &trip))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x);
        assert_eq!(CsrMatrix::zeros(3, 3).spmv(&x).unwrap(), vec![0.0; 3]);
        assert!(CsrMatrix::identity(2).spmv(&x).is_err());
    }

    #[test]
    fn matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut trip = Vec::new();
        let mut dense = [[0.0f64; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                if rng.gen_bool(0.6) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    trip.push((i, j, v));
                    dense[i][j] += v;
                }
            }
        }
        // Duplicate entries must be summed.
        trip.push((2, 3, 0.25));
        dense[2][3] += 0.25;
        let a = CsrMatrix::from_triplets(5, 5, &trip);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.spmv(&x).unwrap();
        for i in 0..5 {
            let expect: f64 = (0..5).map(|j| dense[i][j] * x[j]).sum();
            assert!((y[i] - expect).abs() < 1e-14);
        }
        for i in 0..5 {
            let cols = &a.col_idx[a.row_ptr[i]..a.row_ptr[i + 1]];
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn restrict_drops_rows_and_cols() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 2, 5.0)]);
        let keep = [Some(0), None, Some(1)];
        let r = a.restrict(&keep, 2, &keep, 2);
        assert_eq!(r.to_dense().data, vec![1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, -2.0), (1, 0, 0.5)]);
        let t = a.transpose();
        assert_eq!((t.n_rows, t.n_cols), (3, 2));
        assert_eq!(t.transpose(), a);
    }
}
