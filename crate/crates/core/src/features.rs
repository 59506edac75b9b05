//! Feature matrices handed to the learners: sparse binary rows from n-gram
//! vectorization, or dense real rows from embeddings and SVD projections.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

/// CSR matrix whose stored entries are all 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl SparseBinaryMatrix {
    /// Each row must list strictly increasing column indices below `n_cols`.
    pub fn from_rows(rows: Vec<Vec<u32>>, n_cols: usize) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for (r, row) in rows.into_iter().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("row {r}: column indices not strictly increasing")));
            }
            if let Some(&last) = row.last() {
                if last as usize >= n_cols {
                    return Err(Error::invalid(format!("row {r}: column {last} >= {n_cols}")));
                }
            }
            indices.extend(row);
            indptr.push(indices.len());
        }
        Ok(SparseBinaryMatrix {
            n_cols,
            indptr,
            indices,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_rows(), self.n_cols);
        for i in 0..self.n_rows() {
            let r = m.row_mut(i);
            for &c in &self.indices[self.indptr[i]..self.indptr[i + 1]] {
                r[c as usize] = 1.0;
            }
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> SparseBinaryMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for &r in rows {
            indices.extend_from_slice(self.row(r));
            indptr.push(indices.len());
        }
        SparseBinaryMatrix {
            n_cols: self.n_cols,
            indptr,
            indices,
        }
    }
}

/// One row of a [`FeatureMatrix`].
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Sparse(&'a [u32]),
    Dense(&'a [f64]),
}

impl Row<'_> {
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        match *self {
            Row::Sparse(cols) => cols.iter().map(|&c| w[c as usize]).sum(),
            Row::Dense(x) => linalg::dot(x, w),
        }
    }

    /// `out += alpha * row`.
    #[inline]
    pub fn axpy(&self, alpha: f64, out: &mut [f64]) {
        match *self {
            Row::Sparse(cols) => cols.iter().for_each(|&c| out[c as usize] += alpha),
            Row::Dense(x) => linalg::axpy(alpha, x, out),
        }
    }

    pub fn sq_norm(&self) -> f64 {
        match *self {
            Row::Sparse(cols) => cols.len() as f64,
            Row::Dense(x) => linalg::dot(x, x),
        }
    }

    /// Inner product of two rows.
    pub fn dot_row(&self, other: &Row<'_>) -> f64 {
        match (*self, *other) {
            (Row::Dense(a), Row::Dense(b)) => linalg::dot(a, b),
            (Row::Sparse(a), Row::Dense(b)) | (Row::Dense(b), Row::Sparse(a)) => {
                a.iter().map(|&c| b[c as usize]).sum()
            }
            (Row::Sparse(a), Row::Sparse(b)) => {
                let (mut i, mut j, mut n) = (0, 0, 0usize);
                while i < a.len() && j < b.len() {
                    match a[i].cmp(&b[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            n += 1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                n as f64
            }
        }
    }

    pub fn get(&self, col: usize) -> f64 {
        match *self {
            Row::Sparse(cols) => {
                if cols.binary_search(&(col as u32)).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            Row::Dense(x) => x[col],
        }
    }

    pub fn to_vec(&self, n_cols: usize) -> Vec<f64> {
        match *self {
            Row::Dense(x) => x.to_vec(),
            Row::Sparse(cols) => {
                let mut v = vec![0.0; n_cols];
                cols.iter().for_each(|&c| v[c as usize] = 1.0);
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Sparse(SparseBinaryMatrix),
    Dense(DenseMatrix),
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        match self {
            FeatureMatrix::Sparse(m) => m.n_rows(),
            FeatureMatrix::Dense(m) => m.rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            FeatureMatrix::Sparse(m) => m.n_cols(),
            FeatureMatrix::Dense(m) => m.cols(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> Row<'_> {
        match self {
            FeatureMatrix::Sparse(m) => Row::Sparse(m.row(i)),
            FeatureMatrix::Dense(m) => Row::Dense(m.row(i)),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureMatrix::Sparse(_))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        match self {
            FeatureMatrix::Sparse(m) => FeatureMatrix::Sparse(m.select_rows(rows)),
            FeatureMatrix::Dense(m) => FeatureMatrix::Dense(m.select_rows(rows)),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            FeatureMatrix::Sparse(m) => m.to_dense(),
            FeatureMatrix::Dense(m) => m.clone(),
        }
    }

    /// `self · rhs` for a dense right-hand side.
    pub fn mul_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                got: rhs.rows(),
            });
        }
        match self {
            FeatureMatrix::Dense(m) => m.matmul(rhs),
            FeatureMatrix::Sparse(m) => {
                let mut out = DenseMatrix::zeros(m.n_rows(), rhs.cols());
                for i in 0..m.n_rows() {
                    let o = out.row_mut(i);
                    for &c in m.row(i) {
                        linalg::axpy(1.0, rhs.row(c as usize), o);
                    }
                }
                Ok(out)
            }
        }
    }

    /// `selfᵀ · rhs` for a dense right-hand side.
    pub fn t_mul_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: rhs.rows(),
            });
        }
        match self {
            FeatureMatrix::Dense(m) => m.t_matmul(rhs),
            FeatureMatrix::Sparse(m) => {
                let mut out = DenseMatrix::zeros(m.n_cols(), rhs.cols());
                for i in 0..m.n_rows() {
                    let r = rhs.row(i);
                    for &c in m.row(i) {
                        linalg::axpy(1.0, r, out.row_mut(c as usize));
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            FeatureMatrix::Sparse(m) => (m.nnz() as f64).sqrt(),
            FeatureMatrix::Dense(m) => m.frobenius_norm(),
        }
    }
}

impl From<DenseMatrix> for FeatureMatrix {
    fn from(m: DenseMatrix) -> Self {
        FeatureMatrix::Dense(m)
    }
}

impl From<SparseBinaryMatrix> for FeatureMatrix {
    fn from(m: SparseBinaryMatrix) -> Self {
        FeatureMatrix::Sparse(m)
    }
}
