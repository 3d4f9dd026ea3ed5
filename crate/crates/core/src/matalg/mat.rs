use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Builds a matrix from row-major entries, rejecting empty shapes and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {c}",
                rows[bad].len()
            )));
        }
        Mat::new(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty shape {rows}x{cols}");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// n×1 column vector.
    pub fn column_vector(values: &[f64]) -> Self {
        Mat::from_fn(values.len(), 1, |i, _| values[i])
    }

    /// r×s matrix of ones.
    pub fn ones(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| 1.0)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    /// Product for shapes the caller already knows conform.
    pub(crate) fn mul_unchecked(&self, rhs: &Mat) -> Mat {
        debug_assert_eq!(self.cols, rhs.rows);
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Mat {
            rows: self.rows,
            cols: rhs.cols,
            data: out,
        }
    }

    /// `self' * rhs` without materialising the transpose.
    pub fn t_mul(&self, rhs: &Mat) -> Result<Mat> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot form A'B for {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![0.0; self.cols * rhs.cols];
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, a) in a_row.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Mat {
            rows: self.cols,
            cols: rhs.cols,
            data: out,
        })
    }

    fn zip_with(&self, rhs: &Mat, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "cannot {op} {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, "subtract", |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Mat {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Columns `indices` in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Mat {
        assert!(!indices.is_empty(), "no columns selected");
        Mat::from_fn(self.rows, indices.len(), |i, j| self[(i, indices[j])])
    }

    /// Columns `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> Mat {
        let idx: Vec<usize> = (start..end).collect();
        self.select_columns(&idx)
    }

    pub fn hstack(&self, rhs: &Mat) -> Result<Mat> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot stack {} rows beside {} rows",
                self.rows, rhs.rows
            )));
        }
        let c = self.cols + rhs.cols;
        Ok(Mat::from_fn(self.rows, c, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                rhs[(i, j - self.cols)]
            }
        }))
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Subtracts each column's mean.
    pub fn center_columns(&self) -> Mat {
        let means = self.column_means();
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - means[j])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Symmetric square matrix.
#[derive(Clone, PartialEq, Debug)]
pub struct SymMat(Mat);

impl SymMat {
    /// Validates symmetry to `1e-12 * max(1, |s_ij|)`.
    pub fn new(mat: Mat) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                mat.rows, mat.cols
            )));
        }
        let n = mat.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (mat[(i, j)], mat[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymMat(mat))
    }

    /// Replaces `mat` by `(mat + mat') / 2`. Used for products that are
    /// symmetric in exact arithmetic.
    pub fn symmetrize(mat: &Mat) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                mat.rows, mat.cols
            )));
        }
        let n = mat.rows;
        Ok(SymMat(Mat::from_fn(n, n, |i, j| {
            0.5 * (mat[(i, j)] + mat[(j, i)])
        })))
    }

    /// `A' A`.
    pub fn gram(a: &Mat) -> SymMat {
        let g = a.t_mul(a).expect("A'A always conforms");
        SymMat::symmetrize(&g).expect("A'A is square")
    }

    pub fn identity(n: usize) -> Self {
        SymMat(Mat::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(Mat::zeros(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMat(Mat::diag(values))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat(self.0.scale(c))
    }

    pub fn add(&self, rhs: &SymMat) -> Result<SymMat> {
        Ok(SymMat(self.0.add(&rhs.0)?))
    }

    pub fn sub(&self, rhs: &SymMat) -> Result<SymMat> {
        Ok(SymMat(self.0.sub(&rhs.0)?))
    }

    /// `B' S B`, symmetrised.
    pub fn congruence(&self, b: &Mat) -> Result<SymMat> {
        let sb = self.0.matmul(b)?;
        SymMat::symmetrize(&b.t_mul(&sb)?)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }
}

impl Index<(usize, usize)> for SymMat {
    type Output = f64;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}
