use ndarray::{Array2, ArrayView2};

use super::operator::{ApplyCounter, LinearOperator};
use crate::error::{Error, Result};

/// Sparse matrix built from unique `(row, col, value)` triplets and stored in
/// compressed sparse row order.
///
/// The sparsity pattern is fixed at construction; values can be updated in
/// place through [`SparseMatrix::values_mut`], whose order is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(i, j, v) in &sorted {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse triplet"));
            }
        }
        sorted.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = sorted.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &sorted {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx: sorted.iter().map(|t| t.1).collect(),
            values: sorted.iter().map(|t| t.2).collect(),
        })
    }

    /// Keeps the entries of a dense matrix whose magnitude exceeds `threshold`.
    pub fn from_dense(a: &ArrayView2<f64>, threshold: f64) -> Result<Self> {
        let triplets: Vec<_> = a
            .indexed_iter()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        Self::from_triplets(a.nrows(), a.ncols(), &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries, i.e. the `l0` count of the support.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(row, col)` of every stored entry, in the order of [`Self::values`].
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |i| {
            self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(move |&j| (i, j))
        })
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.positions().zip(self.values.iter()).map(|((i, j), v)| (i, j, *v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (i, j, v) in self.triplets() {
            out[[i, j]] = v;
        }
        out
    }

    /// `self · X`
    pub fn mul_dense(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.cols);
        let b = x.ncols();
        let mut out = Array2::zeros((self.rows, b));
        for i in 0..self.rows {
            let mut row = out.row_mut(i);
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                row.scaled_add(self.values[idx], &x.row(self.col_idx[idx]));
            }
        }
        out
    }

    /// `selfᵀ · Y`
    pub fn tmul_dense(&self, y: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(y.nrows(), self.rows);
        let b = y.ncols();
        let mut out = Array2::zeros((self.cols, b));
        for i in 0..self.rows {
            let yi = y.row(i);
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.row_mut(self.col_idx[idx]).scaled_add(self.values[idx], &yi);
            }
        }
        out
    }
}

/// Sparse matrix behind the operator interface.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    matrix: SparseMatrix,
    counter: ApplyCounter,
}

impl SparseOperator {
    pub fn new(matrix: SparseMatrix) -> Self {
        Self::with_counter(matrix, ApplyCounter::new())
    }

    pub fn with_counter(matrix: SparseMatrix, counter: ApplyCounter) -> Self {
        Self { matrix, counter }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut SparseMatrix {
        &mut self.matrix
    }
}

impl LinearOperator for SparseOperator {
    fn nrows(&self) -> usize {
        self.matrix.rows
    }
    fn ncols(&self) -> usize {
        self.matrix.cols
    }
    fn counter(&self) -> &ApplyCounter {
        &self.counter
    }
    fn kernel(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.matrix.mul_dense(&x)
    }
    fn kernel_adjoint(&self, y: ArrayView2<f64>) -> Array2<f64> {
        self.matrix.tmul_dense(&y)
    }
    fn to_dense(&self) -> Array2<f64> {
        self.matrix.to_dense()
    }
}
