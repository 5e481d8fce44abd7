use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                got: data.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    /// Builds a matrix from columns of equal length.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        let n_rows = cols.first().map_or(0, |c| c.as_ref().len());
        let n_cols = cols.len();
        let mut data = vec![0.0; n_rows * n_cols];
        for (j, c) in cols.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    got: c.len(),
                });
            }
            for (i, v) in c.iter().enumerate() {
                data[i * n_cols + j] = *v;
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            n_rows: end - start,
            n_cols: self.n_cols,
            data: self.data[start * self.n_cols..end * self.n_cols].to_vec(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }

    /// Returns a copy with `cols` appended on the right.
    pub fn hstack(&self, cols: &[Vec<f64>]) -> Result<Matrix> {
        for c in cols {
            if c.len() != self.n_rows {
                return Err(Error::DimensionMismatch {
                    expected: self.n_rows,
                    got: c.len(),
                });
            }
        }
        let n_cols = self.n_cols + cols.len();
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend(cols.iter().map(|c| c[i]));
        }
        Ok(Matrix {
            n_rows: self.n_rows,
            n_cols,
            data,
        })
    }

    pub(crate) fn check_cols(&self, expected: usize) -> Result<()> {
        if self.n_cols != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.n_cols,
            });
        }
        Ok(())
    }
}
