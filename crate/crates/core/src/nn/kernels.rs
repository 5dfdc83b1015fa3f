//! Dense and sparse matrix products.
//!
//! The unsuffixed kernels use the rayon pool when the `parallel` feature is
//! on; the `_seq` variants are always single-threaded. Each output row is
//! accumulated in the same order on both paths.

use super::sparse::SparseMatrix;
use super::tensor::Tensor;
use crate::par;
use crate::{Error, Result};

fn check_matmul(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a.1 != b.0 {
        return Err(Error::Nn(format!("matmul: shape mismatch {a:?} x {b:?}")));
    }
    Ok(())
}

#[inline]
fn matmul_row(a: &Tensor, b: &Tensor, i: usize, out: &mut [f64]) {
    for (k, &aik) in a.row(i).iter().enumerate() {
        if aik == 0.0 {
            continue;
        }
        for (o, &bkj) in out.iter_mut().zip(b.row(k)) {
            *o += aik * bkj;
        }
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_matmul(a.shape(), b.shape())?;
    let mut out = Tensor::zeros(a.rows(), b.cols());
    par::for_each_row_mut(out.data_mut(), b.cols(), |i, row| matmul_row(a, b, i, row));
    Ok(out)
}

pub fn matmul_seq(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_matmul(a.shape(), b.shape())?;
    let mut out = Tensor::zeros(a.rows(), b.cols());
    par::for_each_row_mut_seq(out.data_mut(), b.cols(), |i, row| matmul_row(a, b, i, row));
    Ok(out)
}

/// `a * b^T`.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols() != b.cols() {
        return Err(Error::Nn(format!(
            "matmul_bt: shape mismatch {:?} x {:?}^T",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(a.rows(), b.rows());
    par::for_each_row_mut(out.data_mut(), b.rows(), |i, row| {
        let ai = a.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(ai, b.row(j));
        }
    });
    Ok(out)
}

/// `a^T * b`.
pub fn matmul_at(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows() != b.rows() {
        return Err(Error::Nn(format!(
            "matmul_at: shape mismatch {:?}^T x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    matmul(&a.transpose(), b)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn spmm_row(a: &SparseMatrix, x: &Tensor, i: usize, out: &mut [f64]) {
    for (j, v) in a.row(i) {
        for (o, &xj) in out.iter_mut().zip(x.row(j)) {
            *o += v * xj;
        }
    }
}

fn check_spmm(a: &SparseMatrix, x: &Tensor) -> Result<()> {
    if a.cols() != x.rows() {
        return Err(Error::Nn(format!(
            "spmm: shape mismatch {:?} x {:?}",
            a.shape(),
            x.shape()
        )));
    }
    Ok(())
}

pub fn spmm(a: &SparseMatrix, x: &Tensor) -> Result<Tensor> {
    check_spmm(a, x)?;
    let mut out = Tensor::zeros(a.rows(), x.cols());
    par::for_each_row_mut(out.data_mut(), x.cols(), |i, row| spmm_row(a, x, i, row));
    Ok(out)
}

pub fn spmm_seq(a: &SparseMatrix, x: &Tensor) -> Result<Tensor> {
    check_spmm(a, x)?;
    let mut out = Tensor::zeros(a.rows(), x.cols());
    par::for_each_row_mut_seq(out.data_mut(), x.cols(), |i, row| spmm_row(a, x, i, row));
    Ok(out)
}

/// Pairwise row dot products kept where `dot >= threshold` (and always on
/// the diagonal). Returns, per row, the sorted retained `(col, dot)` pairs.
pub fn thresholded_gram(x: &Tensor, threshold: f64) -> Vec<Vec<(usize, f64)>> {
    let n = x.rows();
    par::map_range(n, |i| thresholded_gram_row(x, i, threshold))
}

pub fn thresholded_gram_seq(x: &Tensor, threshold: f64) -> Vec<Vec<(usize, f64)>> {
    (0..x.rows()).map(|i| thresholded_gram_row(x, i, threshold)).collect()
}

fn thresholded_gram_row(x: &Tensor, i: usize, threshold: f64) -> Vec<(usize, f64)> {
    let xi = x.row(i);
    let mut row = Vec::new();
    for j in 0..x.rows() {
        let s = dot(xi, x.row(j));
        if j == i || s >= threshold {
            row.push((j, s));
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn hand_matmul() {
        let a = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = t(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), t(&[&[19.0, 22.0], &[43.0, 50.0]]));
        assert_eq!(matmul_bt(&a, &b).unwrap(), t(&[&[17.0, 23.0], &[39.0, 53.0]]));
        assert_eq!(matmul_at(&a, &b).unwrap(), t(&[&[26.0, 30.0], &[38.0, 44.0]]));
        let err = matmul(&a, &Tensor::zeros(3, 1)).unwrap_err();
        assert!(err.to_string().contains("(2, 2)") && err.to_string().contains("(3, 1)"));
    }

    #[test]
    fn spmm_identity() {
        let x = t(&[&[1.0, -2.0], &[0.5, 3.0], &[4.0, 0.0]]);
        assert_eq!(spmm(&SparseMatrix::identity(3), &x).unwrap(), x);
    }

    fn dense(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::from_vec(rows, cols, v[..rows * cols].to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn spmm_matches_dense(
            vals in proptest::collection::vec(-3i32..4, 36),
            xs in proptest::collection::vec(-2.0f64..2.0, 24),
        ) {
            // integer-valued sparse entries keep the comparison exact
            let mut trips = Vec::new();
            for (k, &v) in vals.iter().enumerate() {
                if v != 0 {
                    trips.push((k / 6, k % 6, v as f64));
                }
            }
            let a = SparseMatrix::from_triplets(6, 6, trips).unwrap();
            let x = dense(6, 4, &xs);
            let s = spmm(&a, &x).unwrap();
            let d = matmul(&a.to_dense(), &x).unwrap();
            prop_assert_eq!(&s, &d);
            prop_assert_eq!(&s, &spmm_seq(&a, &x).unwrap());
            prop_assert_eq!(&d, &matmul_seq(&a.to_dense(), &x).unwrap());
        }
    }
}
