//! Compressed sparse row matrices.
//!
//! Sparse operands are constants in every computation here: adjacency
//! matrices, propagation kernels, similarity Laplacians, diagonal masks.
//! No gradient ever flows into a sparse matrix.

use alloc::{vec, vec::Vec};
use serde::{Deserialize, Serialize};

use crate::math::Real;

use super::{DenseMatrix, TensorError};

/// CSR matrix; within each row, column indices are strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Real>,
}

impl SparseMatrix {
    /// Build from coordinate triplets. Rejects out-of-range indices and
    /// duplicate `(row, col)` pairs; weights may be any finite value.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, Real)],
    ) -> Result<Self, TensorError> {
        let mut entries: Vec<(usize, usize, Real)> = Vec::with_capacity(triplets.len());
        for &(r, c, w) in triplets {
            if r >= rows || c >= cols {
                return Err(TensorError::IndexOutOfRange {
                    index: if r >= rows { r } else { c },
                    len: if r >= rows { rows } else { cols },
                });
            }
            if !w.is_finite() {
                return Err(TensorError::NonFinite { op: "from_triplets" });
            }
            entries.push((r, c, w));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(TensorError::DuplicateEntry {
                    row: pair[0].0,
                    col: pair[0].1,
                });
            }
        }

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, w) in &entries {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(w);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<(usize, usize, Real)> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets).expect("identity triplets are valid")
    }

    /// Diagonal matrix from a vector of length `n`; zero entries are dropped.
    pub fn diagonal(diag: &[Real]) -> Self {
        let triplets: Vec<(usize, usize, Real)> = diag
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(diag.len(), diag.len(), &triplets).expect("diagonal triplets are valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, weight)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Real)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .zip(self.values[span].iter())
            .map(|(&c, &w)| (c, w))
    }

    /// All `(row, column, weight)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Real)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(c, w)| (i, c, w)))
    }

    pub fn row_sums(&self) -> Vec<Real> {
        let mut sums = vec![0.0; self.rows];
        for (i, _, w) in self.iter() {
            sums[i] += w;
        }
        sums
    }

    /// Exact structural symmetry: every `(i, j, w)` has a matching `(j, i, w)`.
    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        self.iter().all(|(i, j, w)| self.get(j, i) == w)
    }

    /// Value at `(i, j)`; absent entries read as zero.
    pub fn get(&self, i: usize, j: usize) -> Real {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(0.0, |(_, w)| w)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, w) in self.iter() {
            out[(i, j)] = w;
        }
        out
    }

    /// `self * d`; per output entry the summation follows ascending column
    /// order, matching `to_dense().matmul(d)` bit for bit.
    pub fn mul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix, TensorError> {
        if self.cols != d.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "spmm",
                lhs: self.shape(),
                rhs: d.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, d.cols());
        for i in 0..self.rows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let cols = &self.col_idx[span.clone()];
            let vals = &self.values[span];
            let out_row = out.row_mut(i);
            for (&k, &w) in cols.iter().zip(vals.iter()) {
                let d_row = d.row(k);
                for (o, &v) in out_row.iter_mut().zip(d_row.iter()) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * d`, computed without materializing the transpose.
    pub fn mul_dense_transposed(&self, d: &DenseMatrix) -> Result<DenseMatrix, TensorError> {
        if self.rows != d.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "spmm_t",
                lhs: (self.cols, self.rows),
                rhs: d.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.cols, d.cols());
        for i in 0..self.rows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            for (&j, &w) in self.col_idx[span.clone()].iter().zip(self.values[span].iter()) {
                let d_row = d.row(i);
                let out_row = out.row_mut(j);
                for (o, &v) in out_row.iter_mut().zip(d_row.iter()) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}
