//! Reverse-mode differentiation over a fixed operation set.
//!
//! A [`Tape`] records every value produced during one forward pass. Leaves
//! are either parameters (gradients wanted) or constants. [`Tape::backward`]
//! walks the records in reverse once; afterwards the tape is consumed and
//! refuses further use.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels;
use super::sparse::{SparseMatrix, SparseOperand};
use super::tensor::Tensor;
use crate::par;
use crate::{Error, Result};

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Value {
    Dense(Tensor),
    Sparse(SparseMatrix),
}

/// Retained entries of a thresholded similarity graph, per row, sorted by
/// column and always including the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrozenPattern {
    rows: Vec<Vec<usize>>,
}

impl FrozenPattern {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM { a: SparseOperand, x: Var },
    SpMMVar { a: Var, x: Var },
    Add(Var, Var),
    SliceRows { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Relu(Var),
    Dropout { x: Var, mask: Arc<Tensor> },
    RowL2Normalize { x: Var, norms: Vec<f64> },
    Gram(Var),
    ThresholdGraph { x: Var, degree: Vec<f64> },
    SoftmaxCe { logits: Var, rows: Vec<usize>, labels: Vec<usize>, probs: Tensor },
    SumSquares(Var),
}

#[derive(Debug)]
struct Node {
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Norms below this are treated as zero vectors.
const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of a scalar with respect to tape values, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a dense value; `None` when the value does not influence the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient, or zeros of the given shape.
    pub fn get_or_zeros(&self, var: Var, shape: (usize, usize)) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn check_live(&self) -> Result<()> {
        if self.consumed {
            return Err(Error::Nn("tape already consumed by backward".into()));
        }
        Ok(())
    }

    fn push(&mut self, value: Value, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn dense(&self, v: Var) -> Result<&Tensor> {
        match &self.nodes.get(v.0).ok_or_else(|| Error::Nn("unknown tape variable".into()))?.value {
            Value::Dense(t) => Ok(t),
            Value::Sparse(_) => Err(Error::Nn("expected a dense value, found sparse".into())),
        }
    }

    fn sparse(&self, v: Var) -> Result<&SparseMatrix> {
        match &self.nodes.get(v.0).ok_or_else(|| Error::Nn("unknown tape variable".into()))?.value {
            Value::Sparse(s) => Ok(s),
            Value::Dense(_) => Err(Error::Nn("expected a sparse value, found dense".into())),
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Dense value of `v`.
    pub fn value(&self, v: Var) -> Result<&Tensor> {
        self.dense(v)
    }

    /// Sparse value of `v` (as produced by [`Tape::threshold_graph`]).
    pub fn sparse_value(&self, v: Var) -> Result<&SparseMatrix> {
        self.sparse(v)
    }

    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.check_live()?;
        Ok(self.push(Value::Dense(value), Op::Leaf, true))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.check_live()?;
        Ok(self.push(Value::Dense(value), Op::Leaf, false))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let out = kernels::matmul(self.dense(a)?, self.dense(b)?)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Value::Dense(out), Op::MatMul(a, b), needs))
    }

    /// Constant sparse `a` times dense `x`.
    pub fn spmm(&mut self, a: &SparseOperand, x: Var) -> Result<Var> {
        self.check_live()?;
        let out = kernels::spmm(&a.forward, self.dense(x)?)?;
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(out), Op::SpMM { a: a.clone(), x }, needs))
    }

    /// Sparse tape value `a` times dense `x`; differentiable in both.
    pub fn spmm_var(&mut self, a: Var, x: Var) -> Result<Var> {
        self.check_live()?;
        let out = kernels::spmm(self.sparse(a)?, self.dense(x)?)?;
        let needs = self.needs(a) || self.needs(x);
        Ok(self.push(Value::Dense(out), Op::SpMMVar { a, x }, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let out = self.dense(a)?.add(self.dense(b)?)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Value::Dense(out), Op::Add(a, b), needs))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        self.check_live()?;
        let out = self.dense(x)?.slice_rows(start, end)?;
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(out), Op::SliceRows { x, start }, needs))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.check_live()?;
        if parts.is_empty() {
            return Err(Error::Nn("concat_cols of nothing".into()));
        }
        let tensors = parts.iter().map(|&p| self.dense(p)).collect::<Result<Vec<_>>>()?;
        let out = Tensor::concat_cols(&tensors)?;
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Value::Dense(out), Op::ConcatCols(parts.to_vec()), needs))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let src = self.dense(x)?;
        let data = src.data().iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::from_vec(src.rows(), src.cols(), data)?;
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(out), Op::Relu(x), needs))
    }

    /// Multiply by a fixed mask (see [`dropout_mask`]). Pass `None` in
    /// evaluation mode; the input is returned unchanged.
    pub fn dropout(&mut self, x: Var, mask: Option<Arc<Tensor>>) -> Result<Var> {
        self.check_live()?;
        let Some(mask) = mask else { return Ok(x) };
        let src = self.dense(x)?;
        src.check_same(&mask, "dropout")?;
        let data = src.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
        let out = Tensor::from_vec(src.rows(), src.cols(), data)?;
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(out), Op::Dropout { x, mask }, needs))
    }

    /// Scale each row to unit L2 norm; rows with norm below 1e-12 become zero.
    pub fn row_l2_normalize(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let src = self.dense(x)?;
        let cols = src.cols();
        let norms: Vec<f64> = (0..src.rows()).map(|i| kernels::dot(src.row(i), src.row(i)).sqrt()).collect();
        let mut out = src.clone();
        par::for_each_row_mut(out.data_mut(), cols, |i, row| {
            if norms[i] < NORM_EPS {
                row.iter_mut().for_each(|v| *v = 0.0);
            } else {
                row.iter_mut().for_each(|v| *v /= norms[i]);
            }
        });
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(out), Op::RowL2Normalize { x, norms }, needs))
    }

    /// `x * x^T`.
    pub fn gram(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let src = self.dense(x)?;
        let out = kernels::matmul_bt(src, src)?;
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(out), Op::Gram(x), needs))
    }

    /// Dense pairwise cosine similarity of the rows of `q`.
    pub fn cosine_similarity_matrix(&mut self, q: Var) -> Result<Var> {
        let n = self.row_l2_normalize(q)?;
        self.gram(n)
    }

    /// Symmetrically normalized similarity graph over the rows of `x`
    /// (expected unit-norm). Off-diagonal `s_ij = x_i . x_j` is kept where
    /// `s_ij >= threshold`, the diagonal is fixed at 1, and the result is
    /// `D^-1/2 A D^-1/2`. With `frozen` the retained pattern is reused
    /// instead of recomputed. Returns the sparse value and its pattern.
    pub fn threshold_graph(
        &mut self,
        x: Var,
        threshold: f64,
        frozen: Option<&FrozenPattern>,
    ) -> Result<(Var, FrozenPattern)> {
        self.check_live()?;
        let src = self.dense(x)?;
        let n = src.rows();
        let per_row: Vec<Vec<(usize, f64)>> = match frozen {
            Some(p) => {
                if p.len() != n {
                    return Err(Error::Nn(format!(
                        "frozen pattern has {} rows, input has {n}",
                        p.len()
                    )));
                }
                par::map_range(n, |i| {
                    p.rows[i]
                        .iter()
                        .map(|&j| (j, kernels::dot(src.row(i), src.row(j))))
                        .collect()
                })
            }
            None => kernels::thresholded_gram(src, threshold),
        };
        let pattern = FrozenPattern {
            rows: per_row.iter().map(|r| r.iter().map(|e| e.0).collect()).collect(),
        };
        let value = |i: usize, j: usize, s: f64| if i == j { 1.0 } else { s };
        let degree: Vec<f64> = per_row
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, s)| value(i, j, s)).sum())
            .collect();
        let per_row_vals: Vec<Vec<(usize, f64)>> = per_row
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|&(j, s)| (j, value(i, j, s) / (degree[i] * degree[j]).sqrt()))
                    .collect()
            })
            .collect();
        let out = SparseMatrix::from_sorted_rows(n, n, &per_row_vals);
        let needs = self.needs(x);
        let var = self.push(Value::Sparse(out), Op::ThresholdGraph { x, degree }, needs);
        Ok((var, pattern))
    }

    /// Mean over `rows` of `-log softmax(logits[r])[labels[r]]`.
    pub fn masked_softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], rows: &[usize]) -> Result<Var> {
        self.check_live()?;
        if rows.is_empty() {
            return Err(Error::Nn("cross entropy over an empty mask".into()));
        }
        if labels.len() != rows.len() {
            return Err(Error::Nn(format!(
                "{} labels for {} masked rows",
                labels.len(),
                rows.len()
            )));
        }
        let z = self.dense(logits)?;
        let probs = softmax_rows(z);
        let mut loss = 0.0;
        for (&r, &y) in rows.iter().zip(labels) {
            if r >= z.rows() || y >= z.cols() {
                return Err(Error::Nn(format!(
                    "row {r} / label {y} outside logits of shape {:?}",
                    z.shape()
                )));
            }
            let row = z.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
        }
        let loss = loss / rows.len() as f64;
        let needs = self.needs(logits);
        Ok(self.push(
            Value::Dense(Tensor::scalar(loss)),
            Op::SoftmaxCe {
                logits,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
                probs,
            },
            needs,
        ))
    }

    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let s: f64 = self.dense(x)?.data().iter().map(|v| v * v).sum();
        let needs = self.needs(x);
        Ok(self.push(Value::Dense(Tensor::scalar(s)), Op::SumSquares(x), needs))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        self.check_live()?;
        let l = self.dense(loss)?;
        if l.shape() != (1, 1) {
            return Err(Error::Nn(format!("backward needs a scalar, got {:?}", l.shape())));
        }
        if !l.is_finite() {
            return Err(Error::Nn("non-finite loss".into()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Value>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Value::Dense(Tensor::scalar(1.0)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].needs_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        let grads = grads
            .into_iter()
            .map(|g| match g {
                Some(Value::Dense(t)) => Some(t),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Value>], v: Var, g: Value) -> Result<()> {
        if !self.needs(v) {
            return Ok(());
        }
        match (&mut grads[v.0], g) {
            (slot @ None, g) => *slot = Some(g),
            (Some(Value::Dense(acc)), Value::Dense(g)) => acc.add_assign(&g)?,
            (Some(Value::Sparse(acc)), Value::Sparse(g)) => {
                let vals = acc.values().iter().zip(g.values()).map(|(a, b)| a + b).collect();
                *acc = acc.with_values(vals);
            }
            _ => return Err(Error::Nn("gradient kind mismatch".into())),
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Value, grads: &mut [Option<Value>]) -> Result<()> {
        let node = &self.nodes[idx];
        let dense_g = || match g {
            Value::Dense(t) => Ok(t),
            Value::Sparse(_) => Err(Error::Nn("unexpected sparse gradient".into())),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let g = dense_g()?;
                if self.needs(*a) {
                    let ga = kernels::matmul_bt(g, self.dense(*b)?)?;
                    self.accumulate(grads, *a, Value::Dense(ga))?;
                }
                if self.needs(*b) {
                    let gb = kernels::matmul_at(self.dense(*a)?, g)?;
                    self.accumulate(grads, *b, Value::Dense(gb))?;
                }
            }
            Op::SpMM { a, x } => {
                let gx = kernels::spmm(&a.transposed, dense_g()?)?;
                self.accumulate(grads, *x, Value::Dense(gx))?;
            }
            Op::SpMMVar { a, x } => {
                let g = dense_g()?;
                let am = self.sparse(*a)?;
                let xv = self.dense(*x)?;
                if self.needs(*x) {
                    let gx = kernels::spmm(&am.transpose(), g)?;
                    self.accumulate(grads, *x, Value::Dense(gx))?;
                }
                if self.needs(*a) {
                    let vals: Vec<f64> = am.triplets().map(|(i, j, _)| kernels::dot(g.row(i), xv.row(j))).collect();
                    self.accumulate(grads, *a, Value::Sparse(am.with_values(vals)))?;
                }
            }
            Op::Add(a, b) => {
                let g = dense_g()?;
                self.accumulate(grads, *a, Value::Dense(g.clone()))?;
                self.accumulate(grads, *b, Value::Dense(g.clone()))?;
            }
            Op::SliceRows { x, start } => {
                let g = dense_g()?;
                let src = self.dense(*x)?;
                let mut gx = Tensor::zeros(src.rows(), src.cols());
                for r in 0..g.rows() {
                    gx.row_mut(start + r).copy_from_slice(g.row(r));
                }
                self.accumulate(grads, *x, Value::Dense(gx))?;
            }
            Op::ConcatCols(parts) => {
                let g = dense_g()?;
                let mut off = 0;
                for &p in parts {
                    let cols = self.dense(p)?.cols();
                    if self.needs(p) {
                        let mut gp = Tensor::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        self.accumulate(grads, p, Value::Dense(gp))?;
                    }
                    off += cols;
                }
            }
            Op::Relu(x) => {
                let g = dense_g()?;
                let src = self.dense(*x)?;
                let data = g
                    .data()
                    .iter()
                    .zip(src.data())
                    .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, Value::Dense(Tensor::from_vec(g.rows(), g.cols(), data)?))?;
            }
            Op::Dropout { x, mask } => {
                let g = dense_g()?;
                let data = g.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
                self.accumulate(grads, *x, Value::Dense(Tensor::from_vec(g.rows(), g.cols(), data)?))?;
            }
            Op::RowL2Normalize { x, norms } => {
                let g = dense_g()?;
                let Value::Dense(y) = &node.value else { unreachable!() };
                let mut gx = g.clone();
                let cols = g.cols();
                par::for_each_row_mut(gx.data_mut(), cols, |i, row| {
                    if norms[i] < NORM_EPS {
                        row.iter_mut().for_each(|v| *v = 0.0);
                        return;
                    }
                    let yi = y.row(i);
                    let proj = kernels::dot(yi, row);
                    for (v, yv) in row.iter_mut().zip(yi) {
                        *v = (*v - yv * proj) / norms[i];
                    }
                });
                self.accumulate(grads, *x, Value::Dense(gx))?;
            }
            Op::Gram(x) => {
                let g = dense_g()?;
                let sym = g.add(&g.transpose())?;
                let gx = kernels::matmul(&sym, self.dense(*x)?)?;
                self.accumulate(grads, *x, Value::Dense(gx))?;
            }
            Op::ThresholdGraph { x, degree } => {
                let Value::Sparse(gs) = g else {
                    return Err(Error::Nn("threshold graph expects a sparse gradient".into()));
                };
                let Value::Sparse(out) = &node.value else { unreachable!() };
                let src = self.dense(*x)?;
                let n = out.rows();
                let (indptr, indices) = (out.indptr(), out.indices());
                let gv = gs.values();
                let ov = out.values();
                let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
                // dL/dd_i from row i and column i of the output.
                let mut gdeg = vec![0.0; n];
                for i in 0..n {
                    for k in indptr[i]..indptr[i + 1] {
                        let j = indices[k];
                        let c = gv[k] * ov[k];
                        gdeg[i] += c;
                        gdeg[j] += c;
                    }
                }
                for i in 0..n {
                    gdeg[i] *= -0.5 / degree[i];
                }
                // dL/ds_ij on retained off-diagonal entries.
                let mut gsim = vec![0.0; out.nnz()];
                for i in 0..n {
                    for k in indptr[i]..indptr[i + 1] {
                        let j = indices[k];
                        if i != j {
                            gsim[k] = gv[k] * inv_sqrt[i] * inv_sqrt[j] + gdeg[i];
                        }
                    }
                }
                // s_ij = x_i . x_j  =>  dx_i += g_ij x_j ; dx_j += g_ij x_i
                let gmat = out.with_values(gsim);
                let mut gx = kernels::spmm(&gmat, src)?;
                let gt = kernels::spmm(&gmat.transpose(), src)?;
                gx.add_assign(&gt)?;
                self.accumulate(grads, *x, Value::Dense(gx))?;
            }
            Op::SoftmaxCe {
                logits,
                rows,
                labels,
                probs,
            } => {
                let scale = dense_g()?.item() / rows.len() as f64;
                let mut gz = Tensor::zeros(probs.rows(), probs.cols());
                for (&r, &y) in rows.iter().zip(labels) {
                    let grow = gz.row_mut(r);
                    for (gv, p) in grow.iter_mut().zip(probs.row(r)) {
                        *gv += p * scale;
                    }
                    grow[y] -= scale;
                }
                self.accumulate(grads, *logits, Value::Dense(gz))?;
            }
            Op::SumSquares(x) => {
                let s = dense_g()?.item();
                let gx = self.dense(*x)?.scale(2.0 * s);
                self.accumulate(grads, *x, Value::Dense(gx))?;
            }
        }
        Ok(())
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Tensor) -> Tensor {
    let mut out = z.clone();
    let cols = z.cols();
    par::for_each_row_mut(out.data_mut(), cols, |_, row| {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    });
    out
}

/// Inverted-dropout mask: each entry is `0` with probability `p`, otherwise
/// `1 / (1 - p)`. Deterministic in `seed`.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Nn(format!("dropout probability must lie in [0, 1), got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / (1.0 - p);
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect();
    Tensor::from_vec(rows, cols, data)
}
