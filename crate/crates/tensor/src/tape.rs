//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every op evaluates eagerly and appends a node to the tape, so nodes are
//! stored in topological order. [`Tape::backward`] walks them in reverse and
//! accumulates exact gradients into each parent; shared sub-expressions
//! receive the sum over all paths.

use std::borrow::Cow;
use std::f64::consts::PI;

use crate::categorical;
use crate::error::{Result, TensorError};
use crate::tensor::{matmul_into, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    Tanh(Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    RowSums(Var),
    AddN(Vec<Var>),
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    SliceRows {
        src: Var,
        start: usize,
    },
    GatherRows {
        src: Var,
        index: Vec<usize>,
    },
    SegmentSum {
        src: Var,
        segments: Vec<(usize, usize)>,
    },
    BlockMatMul {
        h: Var,
        blocks: Vec<(usize, Tensor)>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
        training: bool,
    },
    GaussianLogPdf {
        x: Var,
        mu: Var,
        alpha: Var,
    },
    ArgmaxLogProb {
        mu: Var,
        alpha: Var,
        dmu: Vec<f64>,
        dalpha: Vec<f64>,
    },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Batch-normalization statistics mode.
#[derive(Debug, Clone, Copy)]
pub enum BatchNormMode<'s> {
    /// Normalize with the statistics of the current rows.
    Train { eps: f64 },
    /// Normalize with fixed (running) statistics.
    Eval {
        mean: &'s [f64],
        var: &'s [f64],
        eps: f64,
    },
}

/// Per-column mean and biased variance observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

/// Recorded computation. Values may borrow parameters for the tape's lifetime.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf owning its value.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Trainable leaf borrowing its value.
    pub fn param_ref(&mut self, t: &'a Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, t: &'a Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn zip_same(
        &self,
        a: Var,
        b: Var,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.same_shape(tb, op)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).data().contains(&0.0) {
            return Err(TensorError::Domain {
                op: "div",
                detail: "division by zero".into(),
            });
        }
        let out = self.zip_same(a, b, "div", |x, y| x / y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Div(a, b), rg))
    }

    /// `x (r x c) + bias (1 x c)` broadcast over rows.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("add_row")?;
        let (br, bc) = self.value(bias).dims2("add_row")?;
        if br != 1 || bc != c {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                lhs: vec![r, c],
                rhs: vec![br, bc],
            });
        }
        let b = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(c.max(1)) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(Tensor::matrix(r, c, out), Op::AddRow(x, bias), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = crate::tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::exp);
        let rg = self.rg(x);
        self.push(out, Op::Exp(x), rg)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(&bad) = self.value(x).data().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
            return Err(TensorError::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let out = self.value(x).map(f64::ln);
        let rg = self.rg(x);
        Ok(self.push(out, Op::Log(x), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::tanh);
        let rg = self.rg(x);
        self.push(out, Op::Tanh(x), rg)
    }

    /// Elementwise clamp; gradient passes only where `lo <= x <= hi`.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        let rg = self.rg(x);
        self.push(out, Op::Clamp(x, lo, hi), rg)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "minimum", f64::min)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Minimum(a, b), rg))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(TensorError::Domain {
                op: "mean",
                detail: "empty tensor".into(),
            });
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(m), Op::Mean(x), rg))
    }

    /// Column sums: `r x c -> 1 x c`.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("sum_rows")?;
        let d = self.value(x).data();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(&d[i * c..(i + 1) * c]) {
                *o += v;
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(1, c, out), Op::SumRows(x), rg))
    }

    /// Row sums: `r x c -> r x 1`.
    pub fn row_sums(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("row_sums")?;
        let d = self.value(x).data();
        let out = (0..r).map(|i| d[i * c..(i + 1) * c].iter().sum()).collect();
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(r, 1, out), Op::RowSums(x), rg))
    }

    /// Sum of equally shaped values, accumulated left to right.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or(TensorError::Domain {
            op: "add_n",
            detail: "no operands".into(),
        })?;
        let mut acc = self.value(first).clone();
        for &x in &xs[1..] {
            acc.same_shape(self.value(x), "add_n")?;
            acc.add_assign(self.value(x));
        }
        let rg = xs.iter().any(|&x| self.rg(x));
        Ok(self.push(acc, Op::AddN(xs.to_vec()), rg))
    }

    /// Concatenate rank-2 values along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(TensorError::Domain {
                op: "concat",
                detail: format!("{} parts along axis {axis}", parts.len()),
            });
        }
        let (r0, c0) = self.value(parts[0]).dims2("concat")?;
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat")?;
            if (axis == 0 && c != c0) || (axis == 1 && r != r0) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: vec![r0, c0],
                    rhs: vec![r, c],
                });
            }
            dims.push((r, c));
        }
        let out = if axis == 0 {
            let rows = dims.iter().map(|d| d.0).sum();
            let mut data = Vec::with_capacity(rows * c0);
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
            Tensor::matrix(rows, c0, data)
        } else {
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for &p in parts {
                    data.extend_from_slice(self.value(p).row_slice(i));
                }
            }
            Tensor::matrix(r0, cols, data)
        };
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Rows `start..start + len` of a rank-2 value.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2("slice_rows")?;
        if start + len > r {
            return Err(TensorError::Index {
                op: "slice_rows",
                index: start + len,
                len: r,
            });
        }
        let data = self.value(x).data()[start * c..(start + len) * c].to_vec();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(len, c, data),
            Op::SliceRows { src: x, start },
            rg,
        ))
    }

    /// Rows of `x` picked by `index` (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let (r, c) = self.value(x).dims2("gather_rows")?;
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            if i >= r {
                return Err(TensorError::Index {
                    op: "gather_rows",
                    index: i,
                    len: r,
                });
            }
            data.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(index.len(), c, data),
            Op::GatherRows {
                src: x,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Sum of each `(start, len)` row segment; an empty segment gives a zero row.
    pub fn segment_sum(&mut self, x: Var, segments: &[(usize, usize)]) -> Result<Var> {
        let (r, c) = self.value(x).dims2("segment_sum")?;
        let src = self.value(x).data();
        let mut data = vec![0.0; segments.len() * c];
        for (s, &(start, len)) in segments.iter().enumerate() {
            if start + len > r {
                return Err(TensorError::Index {
                    op: "segment_sum",
                    index: start + len,
                    len: r,
                });
            }
            let out = &mut data[s * c..(s + 1) * c];
            for i in start..start + len {
                for (o, v) in out.iter_mut().zip(&src[i * c..(i + 1) * c]) {
                    *o += v;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(segments.len(), c, data),
            Op::SegmentSum {
                src: x,
                segments: segments.to_vec(),
            },
            rg,
        ))
    }

    /// Block-diagonal product with constant square blocks.
    ///
    /// Each `(offset, a)` multiplies rows `offset..offset + a.rows` of `h` by
    /// `a`. Blocks must tile the rows of `h` without overlap; rows outside any
    /// block are zero in the output.
    pub fn block_matmul(&mut self, blocks: Vec<(usize, Tensor)>, h: Var) -> Result<Var> {
        let (r, c) = self.value(h).dims2("block_matmul")?;
        let src = self.value(h).data();
        let mut out = vec![0.0; r * c];
        for (offset, a) in &blocks {
            let (s, s2) = a.dims2("block_matmul")?;
            if s != s2 || offset + s > r {
                return Err(TensorError::ShapeMismatch {
                    op: "block_matmul",
                    lhs: vec![s, s2],
                    rhs: vec![r, c],
                });
            }
            let rows = offset * c..(offset + s) * c;
            matmul_into(a.data(), &src[rows.clone()], &mut out[rows], s, s, c);
        }
        let rg = self.rg(h);
        Ok(self.push(Tensor::matrix(r, c, out), Op::BlockMatMul { h, blocks }, rg))
    }

    /// Batch normalization over rows with per-column `gamma`/`beta` (`1 x c`).
    ///
    /// In training mode the returned statistics are those of `x`; callers fold
    /// them into their running estimates.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BatchNormMode<'_>,
    ) -> Result<(Var, Option<BatchStats>)> {
        let (r, c) = self.value(x).dims2("batch_norm")?;
        for p in [gamma, beta] {
            let shape = self.value(p).shape();
            if shape != [1, c] {
                return Err(TensorError::ShapeMismatch {
                    op: "batch_norm",
                    lhs: vec![r, c],
                    rhs: shape.to_vec(),
                });
            }
        }
        let xd = self.value(x).data();
        let (mean, var, eps, stats) = match mode {
            BatchNormMode::Train { eps } => {
                if r == 0 {
                    return Err(TensorError::Domain {
                        op: "batch_norm",
                        detail: "training mode needs at least one row".into(),
                    });
                }
                let mut mean = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        mean[j] += xd[i * c + j];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= r as f64);
                let mut var = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        let d = xd[i * c + j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= r as f64);
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.clone(),
                    count: r,
                };
                (mean, var, eps, Some(stats))
            }
            BatchNormMode::Eval { mean, var, eps } => {
                if mean.len() != c || var.len() != c {
                    return Err(TensorError::ShapeMismatch {
                        op: "batch_norm",
                        lhs: vec![r, c],
                        rhs: vec![mean.len(), var.len()],
                    });
                }
                (mean.to_vec(), var.to_vec(), eps, None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = vec![0.0; r * c];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                let h = (xd[i * c + j] - mean[j]) * inv_std[j];
                xhat[i * c + j] = h;
                out[i * c + j] = g[j] * h + b[j];
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let v = self.push(
            Tensor::matrix(r, c, out),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: Tensor::matrix(r, c, xhat),
                inv_std,
                training: matches!(mode, BatchNormMode::Train { .. }),
            },
            rg,
        );
        Ok((v, stats))
    }

    /// Elementwise Gaussian log-density `log N(x | mu, alpha^2)`.
    pub fn gaussian_logpdf(&mut self, x: Var, mu: Var, alpha: Var) -> Result<Var> {
        let (tx, tm, ta) = (self.value(x), self.value(mu), self.value(alpha));
        tx.same_shape(tm, "gaussian_logpdf")?;
        tx.same_shape(ta, "gaussian_logpdf")?;
        if let Some(&bad) = ta.data().iter().find(|&&a| a <= 0.0 || a.is_nan()) {
            return Err(TensorError::Domain {
                op: "gaussian_logpdf",
                detail: format!("non-positive scale {bad}"),
            });
        }
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        let data = tx
            .data()
            .iter()
            .zip(tm.data())
            .zip(ta.data())
            .map(|((&x, &m), &a)| {
                let e = (x - m) / a;
                -half_ln_2pi - a.ln() - 0.5 * e * e
            })
            .collect();
        let out = Tensor::new(tx.shape().to_vec(), data)?;
        let rg = self.rg(x) || self.rg(mu) || self.rg(alpha);
        Ok(self.push(out, Op::GaussianLogPdf { x, mu, alpha }, rg))
    }

    /// Log-probability that `argmax(mu + alpha * eps)` equals `target` for
    /// `eps ~ N(0, I)`, with `mu` and `alpha` given as `1 x C` rows.
    pub fn argmax_log_prob(&mut self, mu: Var, alpha: Var, target: usize) -> Result<Var> {
        let (tm, ta) = (self.value(mu), self.value(alpha));
        tm.same_shape(ta, "argmax_log_prob")?;
        let (r, c) = tm.dims2("argmax_log_prob")?;
        if r != 1 || target >= c {
            return Err(TensorError::Index {
                op: "argmax_log_prob",
                index: target,
                len: c,
            });
        }
        if let Some(&bad) = ta.data().iter().find(|&&a| a <= 0.0 || a.is_nan()) {
            return Err(TensorError::Domain {
                op: "argmax_log_prob",
                detail: format!("non-positive scale {bad}"),
            });
        }
        let lp = categorical::log_prob_with_grad(tm.data(), ta.data(), target);
        let rg = self.rg(mu) || self.rg(alpha);
        Ok(self.push(
            Tensor::scalar(lp.log_prob),
            Op::ArgmaxLogProb {
                mu,
                alpha,
                dmu: lp.dmu,
                dalpha: lp.dalpha,
            },
            rg,
        ))
    }

    /// Gradients of the single-element `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let val = |v: Var| self.value(v);
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, zip(g, val(*b), |g, y| g * y));
                acc(*b, zip(g, val(*a), |g, x| g * x));
            }
            Op::Div(a, b) => {
                let (x, y) = (val(*a), val(*b));
                acc(*a, zip(g, y, |g, y| g / y));
                let gb = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .zip(y.data())
                    .map(|((g, x), y)| -g * x / (y * y))
                    .collect();
                acc(*b, Tensor::new(y.shape().to_vec(), gb).expect("shape"));
            }
            Op::AddRow(x, bias) => {
                acc(*x, g.clone());
                let (r, c) = (g.shape()[0], g.shape()[1]);
                let mut gb = vec![0.0; c];
                for i in 0..r {
                    for (o, v) in gb.iter_mut().zip(g.row_slice(i)) {
                        *o += v;
                    }
                }
                acc(*bias, Tensor::matrix(1, c, gb));
            }
            Op::Scale(x, f) => acc(*x, g.map(|v| v * f)),
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (n, k) = (ta.shape()[0], ta.shape()[1]);
                let m = tb.shape()[1];
                if self.nodes[a.0].requires_grad {
                    // dA = G B^T
                    let mut da = vec![0.0; n * k];
                    for i in 0..n {
                        let grow = g.row_slice(i);
                        for p in 0..k {
                            let brow = &tb.data()[p * m..(p + 1) * m];
                            da[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    acc(*a, Tensor::matrix(n, k, da));
                }
                if self.nodes[b.0].requires_grad {
                    // dB = A^T G
                    let mut db = vec![0.0; k * m];
                    for i in 0..n {
                        let grow = g.row_slice(i);
                        for p in 0..k {
                            let av = ta.data()[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (o, gv) in db[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                *o += av * gv;
                            }
                        }
                    }
                    acc(*b, Tensor::matrix(k, m, db));
                }
            }
            Op::Exp(x) => acc(*x, zip(g, out, |g, y| g * y)),
            Op::Log(x) => acc(*x, zip(g, val(*x), |g, x| g / x)),
            Op::Relu(x) => acc(*x, zip(g, val(*x), |g, x| if x > 0.0 { g } else { 0.0 })),
            Op::Tanh(x) => acc(*x, zip(g, out, |g, y| g * (1.0 - y * y))),
            Op::Clamp(x, lo, hi) => acc(
                *x,
                zip(g, val(*x), |g, x| if x >= *lo && x <= *hi { g } else { 0.0 }),
            ),
            Op::Minimum(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let mut ga = g.clone();
                let mut gb = g.clone();
                for ((i, &x), &y) in ta.data().iter().enumerate().zip(tb.data()) {
                    if x <= y {
                        gb.data_mut()[i] = 0.0;
                    } else {
                        ga.data_mut()[i] = 0.0;
                    }
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::Sum(x) => acc(*x, Tensor::full(val(*x).shape(), g.item())),
            Op::Mean(x) => {
                let t = val(*x);
                acc(*x, Tensor::full(t.shape(), g.item() / t.len() as f64));
            }
            Op::SumRows(x) => {
                let (r, c) = (val(*x).shape()[0], val(*x).shape()[1]);
                let mut d = Vec::with_capacity(r * c);
                for _ in 0..r {
                    d.extend_from_slice(g.data());
                }
                acc(*x, Tensor::matrix(r, c, d));
            }
            Op::RowSums(x) => {
                let (r, c) = (val(*x).shape()[0], val(*x).shape()[1]);
                let mut d = Vec::with_capacity(r * c);
                for i in 0..r {
                    d.extend(std::iter::repeat_n(g.data()[i], c));
                }
                acc(*x, Tensor::matrix(r, c, d));
            }
            Op::AddN(xs) => {
                for &x in xs {
                    acc(x, g.clone());
                }
            }
            Op::Concat { parts, axis } => {
                if *axis == 0 {
                    let mut row = 0;
                    for &p in parts {
                        let (r, c) = (val(p).shape()[0], val(p).shape()[1]);
                        let d = g.data()[row * c..(row + r) * c].to_vec();
                        acc(p, Tensor::matrix(r, c, d));
                        row += r;
                    }
                } else {
                    let rows = g.shape()[0];
                    let mut col = 0;
                    for &p in parts {
                        let c = val(p).shape()[1];
                        let mut d = Vec::with_capacity(rows * c);
                        for i in 0..rows {
                            d.extend_from_slice(&g.row_slice(i)[col..col + c]);
                        }
                        acc(p, Tensor::matrix(rows, c, d));
                        col += c;
                    }
                }
            }
            Op::SliceRows { src, start } => {
                let (r, c) = (val(*src).shape()[0], val(*src).shape()[1]);
                let mut d = vec![0.0; r * c];
                d[start * c..start * c + g.len()].copy_from_slice(g.data());
                acc(*src, Tensor::matrix(r, c, d));
            }
            Op::GatherRows { src, index } => {
                let (r, c) = (val(*src).shape()[0], val(*src).shape()[1]);
                let mut d = vec![0.0; r * c];
                for (k, &i) in index.iter().enumerate() {
                    for (o, v) in d[i * c..(i + 1) * c].iter_mut().zip(g.row_slice(k)) {
                        *o += v;
                    }
                }
                acc(*src, Tensor::matrix(r, c, d));
            }
            Op::SegmentSum { src, segments } => {
                let (r, c) = (val(*src).shape()[0], val(*src).shape()[1]);
                let mut d = vec![0.0; r * c];
                for (s, &(start, len)) in segments.iter().enumerate() {
                    let gs = g.row_slice(s);
                    for i in start..start + len {
                        for (o, v) in d[i * c..(i + 1) * c].iter_mut().zip(gs) {
                            *o += v;
                        }
                    }
                }
                acc(*src, Tensor::matrix(r, c, d));
            }
            Op::BlockMatMul { h, blocks } => {
                let (r, c) = (g.shape()[0], g.shape()[1]);
                let mut d = vec![0.0; r * c];
                for (offset, a) in blocks {
                    let s = a.shape()[0];
                    let at = crate::tensor::transpose(a).expect("rank 2");
                    let rows = offset * c..(offset + s) * c;
                    matmul_into(at.data(), &g.data()[rows.clone()], &mut d[rows], s, s, c);
                }
                acc(*h, Tensor::matrix(r, c, d));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                training,
            } => {
                let (r, c) = (g.shape()[0], g.shape()[1]);
                let gam = val(*gamma).data();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        dgamma[j] += g.data()[i * c + j] * xhat.data()[i * c + j];
                        dbeta[j] += g.data()[i * c + j];
                    }
                }
                let mut dx = vec![0.0; r * c];
                if *training {
                    let rf = r as f64;
                    for j in 0..c {
                        // dxhat = g * gamma; dx = inv_std/r * (r dxhat - sum dxhat - xhat sum(dxhat xhat))
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for i in 0..r {
                            let dh = g.data()[i * c + j] * gam[j];
                            s1 += dh;
                            s2 += dh * xhat.data()[i * c + j];
                        }
                        for i in 0..r {
                            let dh = g.data()[i * c + j] * gam[j];
                            dx[i * c + j] =
                                inv_std[j] / rf * (rf * dh - s1 - xhat.data()[i * c + j] * s2);
                        }
                    }
                } else {
                    for i in 0..r {
                        for j in 0..c {
                            dx[i * c + j] = g.data()[i * c + j] * gam[j] * inv_std[j];
                        }
                    }
                }
                acc(*x, Tensor::matrix(r, c, dx));
                acc(*gamma, Tensor::matrix(1, c, dgamma));
                acc(*beta, Tensor::matrix(1, c, dbeta));
            }
            Op::GaussianLogPdf { x, mu, alpha } => {
                let (tx, tm, ta) = (val(*x), val(*mu), val(*alpha));
                let n = tx.len();
                let mut gx = vec![0.0; n];
                let mut gm = vec![0.0; n];
                let mut ga = vec![0.0; n];
                for i in 0..n {
                    let a = ta.data()[i];
                    let diff = tx.data()[i] - tm.data()[i];
                    let gi = g.data()[i];
                    gx[i] = -gi * diff / (a * a);
                    gm[i] = gi * diff / (a * a);
                    ga[i] = gi * (-1.0 / a + diff * diff / (a * a * a));
                }
                let shape = tx.shape().to_vec();
                acc(*x, Tensor::new(shape.clone(), gx).expect("shape"));
                acc(*mu, Tensor::new(shape.clone(), gm).expect("shape"));
                acc(*alpha, Tensor::new(shape, ga).expect("shape"));
            }
            Op::ArgmaxLogProb {
                mu,
                alpha,
                dmu,
                dalpha,
            } => {
                let s = g.item();
                acc(*mu, Tensor::row(dmu.iter().map(|d| d * s).collect()));
                acc(*alpha, Tensor::row(dalpha.iter().map(|d| d * s).collect()));
            }
        }
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(b.shape().to_vec(), data).expect("shape")
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when no path reaches it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zero-filled to `like` when unreached.
    pub fn get_or_zero(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}
