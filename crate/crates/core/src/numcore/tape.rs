//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every forward op appends a node holding its output value and the inputs
//! it needs for the backward sweep. [`Tape::backward`] walks the nodes in
//! reverse, accumulates gradients, and consumes the tape.

use std::sync::Arc;

use super::tensor::{gemm, Operand};
use super::{CsrMatrix, NumError, Param, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    SoftmaxRows(Var),
    MaskedSoftmaxRows(Var),
    MeanRows(Var),
    RowConcat(Vec<Var>),
    Dot(Var, Var),
    BceWithLogits(Var, Vec<f64>),
    SumSquares(Var),
    Sum(Var),
    Sqrt(Var),
    OuterSum(Var, Var),
    SliceRows(Var, usize),
    GatherCols(Var, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records forward computations for a single backward sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    loss: f64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Gradient w.r.t. `v`, or `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds the gradient for `v` into `param.grad`.
    pub fn accumulate(&self, v: Var, param: &mut Param) {
        if let Some(g) = self.get(v) {
            param.grad.add_assign(g);
        }
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), NumError> {
    if a.shape() != b.shape() {
        return Err(NumError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op) -> Result<Var, NumError> {
        if self.consumed {
            return Err(NumError::TapeConsumed);
        }
        if !value.is_finite() {
            return Err(NumError::NonFinite { op });
        }
        self.nodes.push(Node { value, op: node_op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant or input tensor.
    pub fn constant(&mut self, t: Tensor) -> Result<Var, NumError> {
        self.push("constant", t, Op::Leaf)
    }

    /// Records the current value of a parameter. Route its gradient back
    /// with [`Gradients::accumulate`].
    pub fn param(&mut self, p: &Param) -> Result<Var, NumError> {
        self.push("param", p.value.clone(), Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b))
    }

    /// Product of a constant sparse matrix with a recorded dense value.
    pub fn spmm(&mut self, m: &Arc<CsrMatrix>, x: Var) -> Result<Var, NumError> {
        let out = m.matmul_dense(self.value(x))?;
        self.push("spmm", out, Op::SpMM(Arc::clone(m), x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_same("add", ta, tb)?;
        let mut out = ta.clone();
        out.add_assign(tb);
        self.push("add", out, Op::Add(a, b))
    }

    /// Adds a `1×c` row to every row of an `r×c` value.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NumError> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return Err(NumError::ShapeMismatch {
                op: "add_row",
                left: tx.shape(),
                right: tr.shape(),
            });
        }
        let mut out = tx.clone();
        let c = tx.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tr.data()[i % c];
        }
        self.push("add_row", out, Op::AddRow(x, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_same("sub", ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        self.push("sub", out, Op::Sub(a, b))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, NumError> {
        let out = self.value(x).map(|v| v * factor);
        self.push("scale", out, Op::Scale(x, factor))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NumError> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push("relu", out, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, NumError> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push("leaky_relu", out, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, NumError> {
        let out = self.value(x).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(x))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, NumError> {
        let t = self.value(x);
        let mask = vec![true; t.len()];
        let out = masked_softmax(t, &mask);
        self.push("softmax_rows", out, Op::SoftmaxRows(x))
    }

    /// Row softmax restricted to entries where `mask` is true; masked
    /// entries come out as exactly zero. Every row needs at least one
    /// unmasked entry.
    pub fn masked_softmax_rows(&mut self, x: Var, mask: &[bool]) -> Result<Var, NumError> {
        let t = self.value(x);
        if mask.len() != t.len() {
            return Err(NumError::ShapeMismatch {
                op: "masked_softmax_rows",
                left: t.shape(),
                right: (mask.len(), 1),
            });
        }
        let c = t.cols();
        if (0..t.rows()).any(|r| !mask[r * c..(r + 1) * c].iter().any(|&m| m)) {
            return Err(NumError::EmptyMaskRow);
        }
        let out = masked_softmax(t, mask);
        self.push("masked_softmax_rows", out, Op::MaskedSoftmaxRows(x))
    }

    /// Column-wise mean: `r×c → 1×c`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, NumError> {
        let t = self.value(x);
        if t.rows() == 0 {
            return Err(NumError::Empty { op: "mean_rows" });
        }
        let mut out = Tensor::zeros(1, t.cols());
        for r in 0..t.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(t.row(r)) {
                *o += v;
            }
        }
        let n = t.rows() as f64;
        out.data_mut().iter_mut().for_each(|v| *v /= n);
        self.push("mean_rows", out, Op::MeanRows(x))
    }

    /// Stacks values vertically; all must share the column count.
    pub fn row_concat(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let first = parts.first().ok_or(NumError::Empty { op: "row_concat" })?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(NumError::ShapeMismatch {
                    op: "row_concat",
                    left: (rows, cols),
                    right: t.shape(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        self.push("row_concat", out, Op::RowConcat(parts.to_vec()))
    }

    /// Inner product of two equally shaped values, as a 1×1.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_same("dot", ta, tb)?;
        let s = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum();
        self.push("dot", Tensor::scalar(s), Op::Dot(a, b))
    }

    /// Summed binary cross-entropy of an `n×1` logit column against labels.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var, NumError> {
        let t = self.value(logits);
        if t.cols() != 1 || t.rows() != labels.len() {
            return Err(NumError::ShapeMismatch {
                op: "bce_with_logits",
                left: t.shape(),
                right: (labels.len(), 1),
            });
        }
        let s = t
            .data()
            .iter()
            .zip(labels)
            .map(|(&x, &y)| softplus(x) - x * y)
            .sum();
        self.push(
            "bce_with_logits",
            Tensor::scalar(s),
            Op::BceWithLogits(logits, labels.to_vec()),
        )
    }

    pub fn sum_squares(&mut self, x: Var) -> Result<Var, NumError> {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        self.push("sum_squares", Tensor::scalar(s), Op::SumSquares(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NumError> {
        let s = self.value(x).sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    /// Elementwise square root. The derivative at zero is taken as zero.
    pub fn sqrt(&mut self, x: Var) -> Result<Var, NumError> {
        let t = self.value(x);
        if t.data().iter().any(|&v| v < 0.0) {
            return Err(NumError::NonFinite { op: "sqrt" });
        }
        let out = t.map(f64::sqrt);
        self.push("sqrt", out, Op::Sqrt(x))
    }

    /// `out[i][j] = a[i] + b[j]` for column vectors `a` (n×1) and `b` (m×1).
    pub fn outer_sum(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != 1 || tb.cols() != 1 {
            return Err(NumError::ShapeMismatch {
                op: "outer_sum",
                left: ta.shape(),
                right: tb.shape(),
            });
        }
        let (n, m) = (ta.rows(), tb.rows());
        let mut out = Tensor::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                out.set(i, j, ta.data()[i] + tb.data()[j]);
            }
        }
        self.push("outer_sum", out, Op::OuterSum(a, b))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let t = self.value(x);
        if start + len > t.rows() {
            return Err(NumError::IndexOutOfBounds {
                index: (start + len, 0),
                shape: t.shape(),
            });
        }
        let c = t.cols();
        let out = Tensor::from_vec(len, c, t.data()[start * c..(start + len) * c].to_vec())?;
        self.push("slice_rows", out, Op::SliceRows(x, start))
    }

    /// Picks `x[i][cols[i]]` per row, giving an `n×1` column.
    pub fn gather_cols(&mut self, x: Var, cols: &[usize]) -> Result<Var, NumError> {
        let t = self.value(x);
        if cols.len() != t.rows() {
            return Err(NumError::ShapeMismatch {
                op: "gather_cols",
                left: t.shape(),
                right: (cols.len(), 1),
            });
        }
        let mut data = Vec::with_capacity(cols.len());
        for (r, &c) in cols.iter().enumerate() {
            if c >= t.cols() {
                return Err(NumError::IndexOutOfBounds {
                    index: (r, c),
                    shape: t.shape(),
                });
            }
            data.push(t.get(r, c));
        }
        let out = Tensor::from_vec(cols.len(), 1, data)?;
        self.push("gather_cols", out, Op::GatherCols(x, cols.to_vec()))
    }

    /// Back-propagates from the scalar `loss` and clears the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NumError> {
        if self.consumed {
            return Err(NumError::TapeConsumed);
        }
        let lt = &self.nodes[loss.0].value;
        if lt.shape() != (1, 1) {
            return Err(NumError::NonScalarLoss { shape: lt.shape() });
        }
        let loss_value = lt.item();
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            // Leaves keep their gradient for the caller.
            if matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    gemm(Operand::plain(&g), Operand::transposed(tb), &mut ga, 0.0);
                    let mut gb = Tensor::zeros(tb.rows(), tb.cols());
                    gemm(Operand::transposed(ta), Operand::plain(&g), &mut gb, 0.0);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::SpMM(m, x) => {
                    accumulate(&mut grads, *x, m.transpose_matmul_dense(&g));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(x, row) => {
                    let c = g.cols();
                    let mut gr = Tensor::zeros(1, c);
                    for r in 0..g.rows() {
                        for (o, v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *x, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(x, f) => accumulate(&mut grads, *x, g.map(|v| v * f)),
                Op::Relu(x) => {
                    let tx = &self.nodes[x.0].value;
                    let gx = zip_map(&g, tx, |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *x, gx);
                }
                Op::LeakyRelu(x, slope) => {
                    let tx = &self.nodes[x.0].value;
                    let gx = zip_map(&g, tx, |gv, xv| if xv > 0.0 { gv } else { slope * gv });
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let gx = zip_map(&g, y, |gv, yv| gv * yv * (1.0 - yv));
                    accumulate(&mut grads, *x, gx);
                }
                Op::SoftmaxRows(x) | Op::MaskedSoftmaxRows(x) => {
                    let c = y.cols();
                    let mut gx = Tensor::zeros(y.rows(), c);
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            gx.set(r, j, yr[j] * (gr[j] - inner));
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::MeanRows(x) => {
                    let tx = &self.nodes[x.0].value;
                    let n = tx.rows() as f64;
                    let mut gx = Tensor::zeros(tx.rows(), tx.cols());
                    let c = tx.cols();
                    for (i, v) in gx.data_mut().iter_mut().enumerate() {
                        *v = g.data()[i % c] / n;
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::RowConcat(parts) => {
                    let c = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let r = self.nodes[p.0].value.rows();
                        let chunk = g.data()[offset * c..(offset + r) * c].to_vec();
                        accumulate(&mut grads, *p, Tensor::from_vec(r, c, chunk)?);
                        offset += r;
                    }
                }
                Op::Dot(a, b) => {
                    let s = g.item();
                    let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = tb.map(|v| v * s);
                    let gb = ta.map(|v| v * s);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::BceWithLogits(x, labels) => {
                    let s = g.item();
                    let tx = &self.nodes[x.0].value;
                    let data = tx
                        .data()
                        .iter()
                        .zip(labels)
                        .map(|(&xv, &yv)| s * (sigmoid(xv) - yv))
                        .collect();
                    accumulate(&mut grads, *x, Tensor::from_vec(tx.rows(), 1, data)?);
                }
                Op::SumSquares(x) => {
                    let s = g.item();
                    let gx = self.nodes[x.0].value.map(|v| 2.0 * v * s);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sum(x) => {
                    let tx = &self.nodes[x.0].value;
                    accumulate(&mut grads, *x, Tensor::filled(tx.rows(), tx.cols(), g.item()));
                }
                Op::Sqrt(x) => {
                    let gx = zip_map(&g, y, |gv, yv| if yv > 0.0 { gv / (2.0 * yv) } else { 0.0 });
                    accumulate(&mut grads, *x, gx);
                }
                Op::OuterSum(a, b) => {
                    let (n, m) = g.shape();
                    let mut ga = Tensor::zeros(n, 1);
                    let mut gb = Tensor::zeros(m, 1);
                    for i in 0..n {
                        for j in 0..m {
                            let v = g.get(i, j);
                            ga.data_mut()[i] += v;
                            gb.data_mut()[j] += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::SliceRows(x, start) => {
                    let tx = &self.nodes[x.0].value;
                    let c = tx.cols();
                    let mut gx = Tensor::zeros(tx.rows(), c);
                    gx.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    accumulate(&mut grads, *x, gx);
                }
                Op::GatherCols(x, cols) => {
                    let tx = &self.nodes[x.0].value;
                    let mut gx = Tensor::zeros(tx.rows(), tx.cols());
                    for (r, &c) in cols.iter().enumerate() {
                        gx.set(r, c, g.data()[r]);
                    }
                    accumulate(&mut grads, *x, gx);
                }
            }
        }
        self.nodes.clear();
        self.consumed = true;
        Ok(Gradients {
            loss: loss_value,
            grads,
        })
    }
}

fn masked_softmax(t: &Tensor, mask: &[bool]) -> Tensor {
    let c = t.cols();
    let mut out = Tensor::zeros(t.rows(), c);
    for r in 0..t.rows() {
        let row = t.row(r);
        let m = &mask[r * c..(r + 1) * c];
        let max = row
            .iter()
            .zip(m)
            .filter(|(_, &k)| k)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for j in 0..c {
            if m[j] {
                let e = (row[j] - max).exp();
                out.set(r, j, e);
                total += e;
            }
        }
        for j in 0..c {
            out.set(r, j, out.get(r, j) / total);
        }
    }
    out
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("shapes checked in forward")
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}
