use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix, used for bag-of-words node features.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Keeps the non-zero entries of `m`, columns ascending within each row.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_dense_rows(m, 0..m.rows())
    }

    /// Sparse copy of the listed rows of `m`, in order.
    pub fn from_dense_rows(m: &DenseMatrix, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self {
            rows: offsets.len() - 1,
            cols: m.cols(),
            offsets,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(columns, values)` of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Applies `f(row, values)` to each row's stored values in place.
    pub fn map_rows(&self, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            let span = self.offsets[r]..self.offsets[r + 1];
            f(r, &mut out.values[span]);
        }
        out
    }

    pub fn matmul(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.rows() {
            return Err(Error::shape(
                "sparse_matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, b.rows(), b.cols()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, b.cols());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let o = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (x, y) in o.iter_mut().zip(b.row(c)) {
                    *x += v * y;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * g`.
    pub fn transpose_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != g.rows() {
            return Err(Error::shape(
                "sparse_transpose_matmul",
                format!("({}x{})^T times {}x{}", self.rows, self.cols, g.rows(), g.cols()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, g.cols());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let gr = g.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (x, y) in out.row_mut(c).iter_mut().zip(gr) {
                    *x += v * y;
                }
            }
        }
        Ok(out)
    }
}
