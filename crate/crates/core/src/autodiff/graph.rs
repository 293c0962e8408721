//! Tape-based reverse-mode automatic differentiation over dense row-major
//! matrices.
//!
//! Every node is a `rows x cols` matrix of `f64`. Nodes are appended in
//! evaluation order, so the tape itself is a topological order and
//! [`Graph::backward`] is a single reverse sweep. Scalars are `1 x 1`.

use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const LN_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    Relu(Var),
    Gelu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    GatherRows {
        table: Var,
        ids: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
    /// Scalar node whose gradient with respect to `x` was computed by the
    /// producer (used for CTC).
    External {
        x: Var,
        grad: Vec<f64>,
    },
    /// Label-smoothed KL divergence between a smoothed one-hot target
    /// distribution and row-wise log-probabilities, summed over rows.
    SmoothedNll {
        logp: Var,
        targets: Vec<usize>,
        smoothing: f64,
    },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward sweep, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }
}

fn parents(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => Vec::new(),
        Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::Scale(a, _)
        | Op::Transpose(a)
        | Op::Relu(a)
        | Op::Gelu(a)
        | Op::Softmax(a)
        | Op::LogSoftmax(a)
        | Op::Sum(a)
        | Op::Mean(a) => vec![*a],
        Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
        Op::SliceCols { x, .. } | Op::SliceRows { x, .. } | Op::External { x, .. } => vec![*x],
        Op::ConcatCols(xs) | Op::ConcatRows(xs) => xs.clone(),
        Op::GatherRows { table, .. } => vec![*table],
        Op::SmoothedNll { logp, .. } => vec![*logp],
    }
}

fn row_softmax(src: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for (row, dst) in src.chunks(cols).zip(out.chunks_mut(cols)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            total += *d;
        }
        for d in dst.iter_mut() {
            *d /= total;
        }
    }
    out
}

fn row_log_softmax(src: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for (row, dst) in src.chunks(cols).zip(out.chunks_mut(cols)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = v - lse;
        }
    }
    out
}

/// `out[m x n] += a[m x k] * b[k x n]`
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out_row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        let requires_grad = parents(&op).iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, rows: usize, cols: usize, value: Vec<f64>, requires_grad: bool) -> Var {
        assert_eq!(
            rows * cols,
            value.len(),
            "leaf value length does not match {rows}x{cols}"
        );
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        self.leaf(rows, cols, value, true)
    }

    /// Non-trainable leaf (inputs, masks, positional tables).
    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        self.leaf(rows, cols, value, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(1, 1, vec![v])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn item(&self, v: Var) -> f64 {
        let n = &self.nodes[v.0];
        assert_eq!(n.value.len(), 1, "item() on non-scalar node");
        n.value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn is_finite(&self, v: Var) -> bool {
        self.nodes[v.0].value.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dims {m}x{k} * {k2}x{n}");
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a), self.value(b), &mut out, m, k, n);
        self.push(m, n, out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let shape = self.shape(a);
        assert_eq!(shape, self.shape(b), "add shape mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        self.push(shape.0, shape.1, out, Op::Add(a, b))
    }

    /// Adds a `1 x n` row to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(row), (1, n), "add_row expects a 1x{n} row");
        let r = self.value(row);
        let out = self
            .value(a)
            .chunks(n)
            .flat_map(|chunk| chunk.iter().zip(r).map(|(x, y)| x + y))
            .collect();
        self.push(m, n, out, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let shape = self.shape(a);
        assert_eq!(shape, self.shape(b), "mul shape mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        self.push(shape.0, shape.1, out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|x| x * factor).collect();
        self.push(m, n, out, Op::Scale(a, factor))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = transpose(self.value(a), m, n);
        self.push(n, m, out, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|&x| x.max(0.0)).collect();
        self.push(m, n, out, Op::Relu(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = self
            .value(a)
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh()))
            .collect();
        self.push(m, n, out, Op::Gelu(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = row_softmax(self.value(a), n);
        self.push(m, n, out, Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let out = row_log_softmax(self.value(a), n);
        self.push(m, n, out, Op::LogSoftmax(a))
    }

    /// Row-wise layer normalization with a `1 x n` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (m, n) = self.shape(x);
        assert_eq!(self.shape(gain), (1, n));
        assert_eq!(self.shape(bias), (1, n));
        let g = self.value(gain);
        let b = self.value(bias);
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for (r, row) in self.value(x).chunks(n).enumerate() {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = inv;
            for c in 0..n {
                let h = (row[c] - mean) * inv;
                xhat[r * n + c] = h;
                out[r * n + c] = h * g[c] + b[c];
            }
        }
        self.push(
            m,
            n,
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (m, n) = self.shape(x);
        assert!(start + len <= n, "slice_cols out of range");
        let out = self
            .value(x)
            .chunks(n)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        self.push(m, len, out, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let m = self.shape(xs[0]).0;
        let widths: Vec<usize> = xs
            .iter()
            .map(|&v| {
                let (r, c) = self.shape(v);
                assert_eq!(r, m, "concat_cols row mismatch");
                c
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&v, &w) in xs.iter().zip(&widths) {
                out.extend_from_slice(&self.value(v)[r * w..(r + 1) * w]);
            }
        }
        self.push(m, total, out, Op::ConcatCols(xs.to_vec()))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (m, n) = self.shape(x);
        assert!(start + len <= m, "slice_rows out of range");
        let out = self.value(x)[start * n..(start + len) * n].to_vec();
        self.push(len, n, out, Op::SliceRows { x, start })
    }

    pub fn concat_rows(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let n = self.shape(xs[0]).1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &v in xs {
            let (r, c) = self.shape(v);
            assert_eq!(c, n, "concat_rows col mismatch");
            rows += r;
            out.extend_from_slice(self.value(v));
        }
        self.push(rows, n, out, Op::ConcatRows(xs.to_vec()))
    }

    /// Embedding lookup: row `ids[i]` of `table` becomes row `i`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let (m, n) = self.shape(table);
        let src = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * n);
        for &id in ids {
            assert!(id < m, "gather_rows id {id} out of range {m}");
            out.extend_from_slice(&src[id * n..(id + 1) * n]);
        }
        self.push(
            ids.len(),
            n,
            out,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        self.push(1, 1, vec![s], Op::Mean(x))
    }

    /// Scalar node with value `value` and a caller-supplied gradient
    /// `d value / d x`.
    pub fn external(&mut self, x: Var, value: f64, grad: Vec<f64>) -> Var {
        assert_eq!(grad.len(), self.value(x).len());
        self.push(1, 1, vec![value], Op::External { x, grad })
    }

    /// Sum over rows of `KL(q_r || exp(logp_r))` where `q_r` puts
    /// `1 - smoothing` on `targets[r]` and spreads `smoothing` evenly over
    /// the other columns.
    pub fn smoothed_nll(&mut self, logp: Var, targets: &[usize], smoothing: f64) -> Var {
        let (m, n) = self.shape(logp);
        assert_eq!(m, targets.len());
        assert!(n >= 2 || smoothing == 0.0);
        let lp = self.value(logp);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            assert!(t < n);
            let row = &lp[r * n..(r + 1) * n];
            for (c, &l) in row.iter().enumerate() {
                let q = smoothing_mass(c == t, smoothing, n);
                if q > 0.0 {
                    total += q * (q.ln() - l);
                }
            }
        }
        self.push(
            1,
            1,
            vec![total],
            Op::SmoothedNll {
                logp,
                targets: targets.to_vec(),
                smoothing,
            },
        )
    }

    /// Reverse sweep from a scalar `loss`. Every trainable leaf reachable
    /// from `loss` receives a gradient; unreachable ones get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss(r, c));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[id].take() else {
                continue;
            };
            for p in parents(&node.op) {
                if p.0 >= id {
                    return Err(Error::GraphCycle {
                        parent: id,
                        child: p.0,
                    });
                }
            }
            self.backprop_node(id, &dy, &mut grads);
            grads[id] = Some(dy);
        }

        for (id, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && grads[id].is_none() {
                grads[id] = Some(vec![0.0; node.value.len()]);
            }
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, id: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let (rows, cols) = (node.rows, node.cols);
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let pn = &self.nodes[v.0];
            if !pn.requires_grad {
                return;
            }
            let g = grads[v.0].get_or_insert_with(|| vec![0.0; pn.value.len()]);
            f(g);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = cols;
                let av = self.value(*a);
                let bv = self.value(*b);
                acc(*a, &mut |g| {
                    // dA = dY * B^T
                    let bt = transpose(bv, k, n);
                    matmul_acc(dy, &bt, g, m, n, k);
                });
                acc(*b, &mut |g| {
                    // dB = A^T * dY
                    let at = transpose(av, m, k);
                    matmul_acc(&at, dy, g, k, m, n);
                });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc(v, &mut |g| {
                        for (gi, d) in g.iter_mut().zip(dy) {
                            *gi += d;
                        }
                    });
                }
            }
            Op::AddRow(a, row) => {
                acc(*a, &mut |g| {
                    for (gi, d) in g.iter_mut().zip(dy) {
                        *gi += d;
                    }
                });
                acc(*row, &mut |g| {
                    for chunk in dy.chunks(cols) {
                        for (gi, d) in g.iter_mut().zip(chunk) {
                            *gi += d;
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, &mut |g| {
                    for ((gi, d), y) in g.iter_mut().zip(dy).zip(bv) {
                        *gi += d * y;
                    }
                });
                acc(*b, &mut |g| {
                    for ((gi, d), x) in g.iter_mut().zip(dy).zip(av) {
                        *gi += d * x;
                    }
                });
            }
            Op::Scale(a, f) => acc(*a, &mut |g| {
                for (gi, d) in g.iter_mut().zip(dy) {
                    *gi += d * f;
                }
            }),
            Op::Transpose(a) => acc(*a, &mut |g| {
                let t = transpose(dy, rows, cols);
                for (gi, d) in g.iter_mut().zip(&t) {
                    *gi += d;
                }
            }),
            Op::Relu(a) => {
                let av = self.value(*a);
                acc(*a, &mut |g| {
                    for ((gi, d), &x) in g.iter_mut().zip(dy).zip(av) {
                        if x > 0.0 {
                            *gi += d;
                        }
                    }
                })
            }
            Op::Gelu(a) => {
                let av = self.value(*a);
                acc(*a, &mut |g| {
                    for ((gi, d), &x) in g.iter_mut().zip(dy).zip(av) {
                        let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
                        let dt = (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x);
                        *gi += d * (0.5 * (1.0 + t) + 0.5 * x * dt);
                    }
                })
            }
            Op::Softmax(a) => {
                let y = &node.value;
                acc(*a, &mut |g| {
                    for ((gr, dr), yr) in
                        g.chunks_mut(cols).zip(dy.chunks(cols)).zip(y.chunks(cols))
                    {
                        let dot: f64 = dr.iter().zip(yr).map(|(d, y)| d * y).sum();
                        for ((gi, d), yi) in gr.iter_mut().zip(dr).zip(yr) {
                            *gi += yi * (d - dot);
                        }
                    }
                })
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                acc(*a, &mut |g| {
                    for ((gr, dr), yr) in
                        g.chunks_mut(cols).zip(dy.chunks(cols)).zip(y.chunks(cols))
                    {
                        let total: f64 = dr.iter().sum();
                        for ((gi, d), yi) in gr.iter_mut().zip(dr).zip(yr) {
                            *gi += d - yi.exp() * total;
                        }
                    }
                })
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gain);
                acc(*gain, &mut |g| {
                    for (dr, hr) in dy.chunks(cols).zip(xhat.chunks(cols)) {
                        for ((gi, d), h) in g.iter_mut().zip(dr).zip(hr) {
                            *gi += d * h;
                        }
                    }
                });
                acc(*bias, &mut |g| {
                    for dr in dy.chunks(cols) {
                        for (gi, d) in g.iter_mut().zip(dr) {
                            *gi += d;
                        }
                    }
                });
                acc(*x, &mut |g| {
                    let n = cols as f64;
                    let mut dxhat = vec![0.0; cols];
                    for r in 0..rows {
                        let dr = &dy[r * cols..(r + 1) * cols];
                        let hr = &xhat[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            dxhat[c] = dr[c] * gv[c];
                        }
                        let s1: f64 = dxhat.iter().sum();
                        let s2: f64 = dxhat.iter().zip(hr).map(|(a, b)| a * b).sum();
                        let inv = inv_std[r];
                        for c in 0..cols {
                            g[r * cols + c] += inv / n * (n * dxhat[c] - s1 - hr[c] * s2);
                        }
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let src_cols = self.shape(*x).1;
                acc(*x, &mut |g| {
                    for r in 0..rows {
                        for c in 0..cols {
                            g[r * src_cols + start + c] += dy[r * cols + c];
                        }
                    }
                })
            }
            Op::ConcatCols(xs) => {
                let mut offset = 0;
                for &v in xs {
                    let w = self.shape(v).1;
                    acc(v, &mut |g| {
                        for r in 0..rows {
                            for c in 0..w {
                                g[r * w + c] += dy[r * cols + offset + c];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceRows { x, start } => acc(*x, &mut |g| {
                let base = start * cols;
                for (i, d) in dy.iter().enumerate() {
                    g[base + i] += d;
                }
            }),
            Op::ConcatRows(xs) => {
                let mut offset = 0;
                for &v in xs {
                    let len = self.value(v).len();
                    acc(v, &mut |g| {
                        for (gi, d) in g.iter_mut().zip(&dy[offset..offset + len]) {
                            *gi += d;
                        }
                    });
                    offset += len;
                }
            }
            Op::GatherRows { table, ids } => acc(*table, &mut |g| {
                for (r, &id) in ids.iter().enumerate() {
                    for c in 0..cols {
                        g[id * cols + c] += dy[r * cols + c];
                    }
                }
            }),
            Op::Sum(x) => acc(*x, &mut |g| {
                for gi in g.iter_mut() {
                    *gi += dy[0];
                }
            }),
            Op::Mean(x) => {
                let n = self.value(*x).len() as f64;
                acc(*x, &mut |g| {
                    for gi in g.iter_mut() {
                        *gi += dy[0] / n;
                    }
                })
            }
            Op::External { x, grad } => acc(*x, &mut |g| {
                for (gi, e) in g.iter_mut().zip(grad) {
                    *gi += dy[0] * e;
                }
            }),
            Op::SmoothedNll {
                logp,
                targets,
                smoothing,
            } => {
                let n = self.shape(*logp).1;
                acc(*logp, &mut |g| {
                    for (r, &t) in targets.iter().enumerate() {
                        for c in 0..n {
                            g[r * n + c] -= dy[0] * smoothing_mass(c == t, *smoothing, n);
                        }
                    }
                })
            }
        }
    }
}

fn smoothing_mass(is_target: bool, smoothing: f64, classes: usize) -> f64 {
    if is_target {
        1.0 - smoothing
    } else if classes > 1 {
        smoothing / (classes - 1) as f64
    } else {
        0.0
    }
}
