use std::sync::Arc;

use super::tensor::Tensor;
use crate::{Error, Result};

/// Compressed sparse row matrix. Entries within a row are sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sort triplets by `(i, j)`, sum duplicates and drop zeros.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &triplets {
            if i >= rows || j >= cols {
                return Err(Error::Nn(format!(
                    "triplet ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Nn(format!("triplet ({i}, {j}) has non-finite value")));
            }
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        let mut indptr = vec![0; rows + 1];
        for &(i, _, _) in &merged {
            indptr[i + 1] += 1;
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            indices: merged.iter().map(|t| t.1).collect(),
            values: merged.iter().map(|t| t.2).collect(),
        })
    }

    /// Build from per-row `(col, value)` lists already sorted by column.
    /// Zero values are kept so the pattern stays as given.
    pub(crate) fn from_sorted_rows(rows: usize, cols: usize, per_row: &[Vec<(usize, f64)>]) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        indptr.push(0);
        let nnz: usize = per_row.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in per_row {
            for &(j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub(crate) fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Same pattern, new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        }
    }

    /// `(col, value)` entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Entries sorted by `(i, j)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            out.set(i, j, v);
        }
        out
    }

    /// Transpose, keeping the stored pattern, with the map from each
    /// transposed entry back to its source position.
    pub(crate) fn transpose_with_map(&self) -> (SparseMatrix, Vec<usize>) {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut map = vec![0; self.nnz()];
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                let dst = next[j];
                next[j] += 1;
                indices[dst] = i;
                values[dst] = self.values[k];
                map[dst] = k;
            }
        }
        (
            SparseMatrix {
                rows: self.cols,
                cols: self.rows,
                indptr,
                indices,
                values,
            },
            map,
        )
    }

    pub fn transpose(&self) -> SparseMatrix {
        self.transpose_with_map().0
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.triplets().all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol)
    }
}

/// A constant sparse operand together with its transpose, for products on
/// the tape whose backward pass needs `A^T`.
#[derive(Debug, Clone)]
pub struct SparseOperand {
    pub(crate) forward: Arc<SparseMatrix>,
    pub(crate) transposed: Arc<SparseMatrix>,
}

impl SparseOperand {
    pub fn new(a: SparseMatrix) -> Self {
        let transposed = Arc::new(a.transpose());
        SparseOperand {
            forward: Arc::new(a),
            transposed,
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.forward
    }
}
