use std::ops::{Index, IndexMut};

use crate::error::{check_dim, Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("dense data length", n_rows * n_cols, data.len())?;
        Ok(DenseMatrix { n_rows, n_cols, data })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(n_rows: usize, cols: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::zeros(n_rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            check_dim("column length", n_rows, c.len())?;
            for i in 0..n_rows {
                m[(i, j)] = c[i];
            }
        }
        Ok(m)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("matmul inner dimension", self.n_cols, b.n_rows)?;
        let mut c = Self::zeros(self.n_rows, b.n_cols);
        let m = b.n_cols;
        for i in 0..self.n_rows {
            let out = &mut c.data[i * m..(i + 1) * m];
            for k in 0..self.n_cols {
                let a = self.data[i * self.n_cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(&b.data[k * m..(k + 1) * m]) {
                    *o += a * x;
                }
            }
        }
        Ok(c)
    }

    /// `selfᵀ b` without forming the transpose.
    pub fn t_matmul(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("transposed matmul rows", self.n_rows, b.n_rows)?;
        let (n, m) = (self.n_cols, b.n_cols);
        let mut c = Self::zeros(n, m);
        for k in 0..self.n_rows {
            let arow = &self.data[k * n..(k + 1) * n];
            let brow = &b.data[k * m..(k + 1) * m];
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out = &mut c.data[i * m..(i + 1) * m];
                for (o, x) in out.iter_mut().zip(brow) {
                    *o += a * x;
                }
            }
        }
        Ok(c)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matvec operand", self.n_cols, x.len())?;
        Ok((0..self.n_rows)
            .map(|i| super::dot(self.row(i), x))
            .collect())
    }

    /// `selfᵀ x`
    pub fn t_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("transposed matvec operand", self.n_rows, x.len())?;
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            super::axpy(xi, self.row(i), &mut y);
        }
        Ok(y)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for j in i + 1..self.n_cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix by its symmetric part.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n_rows {
            for j in i + 1..self.n_cols {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n_rows).map(|i| x[i] * super::dot(self.row(i), x)).sum()
    }

    /// First `r` columns.
    pub fn leading_columns(&self, r: usize) -> DenseMatrix {
        let mut out = Self::zeros(self.n_rows, r);
        for i in 0..self.n_rows {
            out.data[i * r..(i + 1) * r].copy_from_slice(&self.row(i)[..r]);
        }
        out
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        check_dim("cholesky square", a.n_rows, a.n_cols)?;
        let n = a.n_rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotSpd { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.n_rows;
        check_dim("cholesky right-hand side", n, b.len())?;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        Ok(y)
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }
}

/// Solves `A X = B` for SPD `A`; `B` holds one right-hand side per column.
pub fn cholesky_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_dim("cholesky rhs rows", a.n_rows, b.n_rows)?;
    let ch = Cholesky::new(a)?;
    let mut x = DenseMatrix::zeros(b.n_rows, b.n_cols);
    for j in 0..b.n_cols {
        let col = ch.solve(&b.column(j))?;
        for i in 0..b.n_rows {
            x[(i, j)] = col[i];
        }
    }
    Ok(x)
}

/// Gaussian elimination with partial pivoting for small general systems.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_dim("lu square", a.n_rows, a.n_cols)?;
    check_dim("lu right-hand side", a.n_rows, b.len())?;
    let n = a.n_rows;
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.data.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        if m[(piv, col)].abs() <= 1e-14 * scale {
            return Err(Error::invalid("singular matrix in lu_solve"));
        }
        if piv != col {
            for j in 0..n {
                m.data.swap(piv * n + j, col * n + j);
            }
            x.swap(piv, col);
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(i, j)] -= f * v;
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}
