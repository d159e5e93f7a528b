//! A small reverse-mode tape over dense matrices.
//!
//! Covers exactly the operations the classifiers and transformer stacks
//! need. Parameters enter by reference, so building a graph never copies
//! weight matrices.

use std::borrow::Cow;

use super::ops::{masked_softmax_in_place, softmax_in_place};
use super::Matrix;
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    Softmax(Var),
    MeanRows(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Matrix,
        count: usize,
    },
}

struct Node<'p> {
    value: Cow<'p, Matrix>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph<'p> {
    nodes: Vec<Node<'p>>,
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// Takes the gradient out, substituting zeros of `shape` when the
    /// variable did not influence the loss.
    pub fn take_or_zeros(&mut self, v: Var, shape: (usize, usize)) -> Matrix {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Cow<'p, Matrix>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[(0, 0)]
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Cow::Owned(m), Op::Leaf, false)
    }

    /// A borrowed trainable leaf.
    pub fn param(&mut self, m: &'p Matrix) -> Var {
        self.push(Cow::Borrowed(m), Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(out), Op::MatMul(a, b), ng))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul_t(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(out), Op::MatMulT(a, b), ng))
    }

    /// `x + 1ᵀb` for a `1 × cols` bias.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let bias = self.value(b);
        if bias.rows() != 1 {
            return Err(Error::shape(format!("bias must be a row, got {:?}", bias.shape())));
        }
        let out = self.value(x).add_row(bias.as_slice())?;
        let ng = self.needs(x) || self.needs(b);
        Ok(self.push(Cow::Owned(out), Op::AddBias(x, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(out), Op::Add(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).scale(s);
        let ng = self.needs(x);
        self.push(Cow::Owned(out), Op::Scale(x, s), ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let ng = self.needs(x);
        self.push(Cow::Owned(out), Op::Relu(x), ng)
    }

    /// tanh approximation of GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self
            .value(x)
            .map(|v| 0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh()));
        let ng = self.needs(x);
        self.push(Cow::Owned(out), Op::Gelu(x), ng)
    }

    /// Per-row normalization followed by `gamma ⊙ x̂ + beta` (both `1 × cols`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let (g, b) = (self.value(gamma), self.value(beta));
        if g.shape() != (1, cols) || b.shape() != (1, cols) {
            return Err(Error::shape(format!(
                "layer_norm over {cols} columns with gamma {:?} and beta {:?}",
                g.shape(),
                b.shape()
            )));
        }
        let mut xhat = Matrix::zeros(rows, cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for c in 0..cols {
                let h = (row[c] - mean) * is;
                xhat[(r, c)] = h;
                out[(r, c)] = g[(0, c)] * h + b[(0, c)];
            }
        }
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            Cow::Owned(out),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.cols() {
            return Err(Error::shape(format!(
                "slice_cols [{start}, {}) of {} columns",
                start + len,
                xv.cols()
            )));
        }
        let out = xv.slice_cols(start, len);
        let ng = self.needs(x);
        Ok(self.push(Cow::Owned(out), Op::SliceCols { x, start }, ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::shape("concat of nothing"))?;
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::shape("concat_cols: row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Cow::Owned(Matrix::from_vec(rows, cols, out)),
            Op::ConcatCols(parts.to_vec()),
            ng,
        ))
    }

    /// Row softmax; with `causal`, row `q` only spreads over columns `0..=q`.
    pub fn softmax_rows(&mut self, x: Var, causal: bool) -> Result<Var> {
        let mut out = self.value(x).clone();
        if causal && out.rows() > out.cols() {
            return Err(Error::shape("causal softmax needs cols >= rows"));
        }
        for r in 0..out.rows() {
            if causal {
                masked_softmax_in_place(out.row_mut(r), r);
            } else {
                softmax_in_place(out.row_mut(r));
            }
        }
        let ng = self.needs(x);
        Ok(self.push(Cow::Owned(out), Op::Softmax(x), ng))
    }

    /// Column means as a `1 × cols` row.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let out = Matrix::row_vector(&self.value(x).column_means());
        let ng = self.needs(x);
        self.push(Cow::Owned(out), Op::MeanRows(x), ng)
    }

    /// Mean softmax cross-entropy over the rows that carry a target.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let lv = self.value(logits);
        if targets.len() != lv.rows() {
            return Err(Error::shape(format!(
                "{} targets for {} logit rows",
                targets.len(),
                lv.rows()
            )));
        }
        let mut probs = lv.clone();
        let mut total = 0.0;
        let mut count = 0;
        for (r, t) in targets.iter().enumerate() {
            let row = probs.row_mut(r);
            softmax_in_place(row);
            if let Some(t) = *t {
                if t >= row.len() {
                    return Err(Error::shape(format!("target {t} out of {} classes", row.len())));
                }
                // log-softmax from the logits keeps precision when p is tiny
                let lr = lv.row(r);
                let max = lr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + lr.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - lr[t];
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::shape("cross_entropy without any target"));
        }
        let loss = Matrix::filled(1, 1, total / count as f64);
        let ng = self.needs(logits);
        Ok(self.push(
            Cow::Owned(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
                count,
            },
            ng,
        ))
    }

    /// Reverse sweep from a `1 × 1` loss.
    pub fn backward(&self, loss: Var) -> Gradients {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Matrix>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let da = g.matmul_t_unchecked(self.value(*b));
                        accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = self.value(*a).t_matmul_unchecked(&g);
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::MatMulT(a, b) => {
                    if self.needs(*a) {
                        let da = g.matmul_unchecked(self.value(*b));
                        accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = g.t_matmul_unchecked(self.value(*a));
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::AddBias(x, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, Matrix::row_vector(&column_sums(&g)));
                    }
                    if self.needs(*x) {
                        accumulate(&mut grads, *x, g);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) && self.needs(*b) {
                        accumulate(&mut grads, *a, g.clone());
                        accumulate(&mut grads, *b, g);
                    } else if self.needs(*a) {
                        accumulate(&mut grads, *a, g);
                    } else {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Scale(x, s) => accumulate(&mut grads, *x, g.scale(*s)),
                Op::Relu(x) => {
                    let dx = g.zip_map(self.value(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Gelu(x) => {
                    let dx = g.zip_map(self.value(*x), |gv, v| {
                        let t = (GELU_C * (v + GELU_A * v * v * v)).tanh();
                        let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                        gv * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
                    });
                    accumulate(&mut grads, *x, dx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let (rows, cols) = xhat.shape();
                    if self.needs(*gamma) {
                        let dgamma = g.zip_map(xhat, |a, b| a * b);
                        accumulate(&mut grads, *gamma, Matrix::row_vector(&column_sums(&dgamma)));
                    }
                    if self.needs(*beta) {
                        accumulate(&mut grads, *beta, Matrix::row_vector(&column_sums(&g)));
                    }
                    if self.needs(*x) {
                        let gm = self.value(*gamma);
                        let mut dx = Matrix::zeros(rows, cols);
                        let nf = cols as f64;
                        for r in 0..rows {
                            let dxhat: Vec<f64> = (0..cols).map(|c| g[(r, c)] * gm[(0, c)]).collect();
                            let sum: f64 = dxhat.iter().sum();
                            let sum_xh: f64 = dxhat.iter().zip(xhat.row(r)).map(|(a, b)| a * b).sum();
                            for c in 0..cols {
                                dx[(r, c)] = inv_std[r] / nf * (nf * dxhat[c] - sum - xhat[(r, c)] * sum_xh);
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                }
                Op::SliceCols { x, start } => {
                    let (rows, cols) = self.value(*x).shape();
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        dx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        if self.needs(p) {
                            accumulate(&mut grads, p, g.slice_cols(offset, w));
                        }
                        offset += w;
                    }
                }
                Op::Softmax(x) => {
                    let p = &node.value;
                    let mut dx = Matrix::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let pr = p.row(r);
                        let gr = g.row(r);
                        let inner: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (c, d) in dx.row_mut(r).iter_mut().enumerate() {
                            *d = pr[c] * (gr[c] - inner);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MeanRows(x) => {
                    let (rows, cols) = self.value(*x).shape();
                    let inv = 1.0 / rows as f64;
                    let dx = Matrix::from_fn(rows, cols, |_, c| g[(0, c)] * inv);
                    accumulate(&mut grads, *x, dx);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                    count,
                } => {
                    let scale = g[(0, 0)] / *count as f64;
                    let mut dl = probs.clone();
                    for (r, t) in targets.iter().enumerate() {
                        let row = dl.row_mut(r);
                        match t {
                            Some(t) => {
                                row[*t] -= 1.0;
                                row.iter_mut().for_each(|v| *v *= scale);
                            }
                            None => row.iter_mut().for_each(|v| *v = 0.0),
                        }
                    }
                    accumulate(&mut grads, *logits, dl);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign_unchecked(&g),
        slot @ None => *slot = Some(g),
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (s, v) in sums.iter_mut().zip(m.row(r)) {
            *s += v;
        }
    }
    sums
}
