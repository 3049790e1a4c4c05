//! Reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates adjoints.

use std::rc::Rc;

use super::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    /// Position on the tape; indexes the vector returned by [`Tape::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

const LN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normed: Matrix,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Rc<Vec<usize>>),
    SliceCols(Var, usize),
    Rope {
        x: Var,
        positions: Rc<Vec<f64>>,
        head_dim: usize,
    },
    NeighborMean(Var, Rc<Vec<Vec<usize>>>),
    MaskedNll {
        logits: Var,
        probs: Matrix,
        targets: Rc<Vec<usize>>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Rotation frequency of pair `i` in a head of width `head_dim`.
pub fn rope_frequency(i: usize, head_dim: usize) -> f64 {
    10000f64.powf(-2.0 * i as f64 / head_dim as f64)
}

/// Rotates consecutive column pairs of each head by `position * frequency`.
/// `sign = -1` applies the inverse rotation.
fn rope_apply(m: &Matrix, positions: &[f64], head_dim: usize, sign: f64) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows {
        let p = positions[r];
        let row = out.row_mut(r);
        for h in (0..m.cols).step_by(head_dim) {
            for i in 0..head_dim / 2 {
                let (s, c) = (sign * p * rope_frequency(i, head_dim)).sin_cos();
                let (a, b) = (row[h + 2 * i], row[h + 2 * i + 1]);
                row[h + 2 * i] = a * c - b * s;
                row[h + 2 * i + 1] = a * s + b * c;
            }
        }
    }
    out
}

pub fn rope(m: &Matrix, positions: &[f64], head_dim: usize) -> Matrix {
    rope_apply(m, positions, head_dim, 1.0)
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
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

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds the single row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let mut v = self.value(a).clone();
        let b = self.value(bias);
        assert_eq!((b.rows, b.cols), (1, v.cols), "bias shape");
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&b.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scaled(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Matrix::from_vec(x.rows, x.cols, x.data.iter().map(|&t| silu(t)).collect());
        self.push(v, Op::Silu(a))
    }

    /// Row-wise layer normalization with learned gain and bias rows.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let n = xv.cols as f64;
        let mut normed = Matrix::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        let mut out = Matrix::zeros(xv.rows, xv.cols);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..xv.cols {
                let h = (row[c] - mean) * is;
                normed.set(r, c, h);
                out.set(r, c, h * g.data[c] + b.data[c]);
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
        )
    }

    /// Row softmax; entries with `mask == false` get probability exactly 0.
    /// Every row must keep at least one entry.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Var {
        let x = self.value(a);
        let mut out = Matrix::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let allowed = |c: usize| mask.map_or(true, |m| m[r * x.cols + c]);
            let max = (0..x.cols)
                .filter(|&c| allowed(c))
                .map(|c| x.get(r, c))
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for c in 0..x.cols {
                if allowed(c) {
                    let e = (x.get(r, c) - max).exp();
                    out.set(r, c, e);
                    total += e;
                }
            }
            for v in out.row_mut(r) {
                *v /= total;
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows, rows, "concat_cols row count");
            for r in 0..rows {
                out.row_mut(r)[offset..offset + m.cols].copy_from_slice(m.row(r));
            }
            offset += m.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat_rows column count");
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn gather_rows(&mut self, a: Var, index: Rc<Vec<usize>>) -> Var {
        let m = self.value(a);
        let mut data = Vec::with_capacity(index.len() * m.cols);
        for &i in index.iter() {
            data.extend_from_slice(m.row(i));
        }
        let out = Matrix::from_vec(index.len(), m.cols, data);
        self.push(out, Op::GatherRows(a, index))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        let out = Matrix::from_fn(m.rows, len, |r, c| m.get(r, start + c));
        self.push(out, Op::SliceCols(a, start))
    }

    /// Rotary position encoding applied per head, one position per row.
    pub fn rope(&mut self, x: Var, positions: Rc<Vec<f64>>, head_dim: usize) -> Var {
        let out = rope_apply(self.value(x), &positions, head_dim, 1.0);
        self.push(
            out,
            Op::Rope {
                x,
                positions,
                head_dim,
            },
        )
    }

    /// Row `i` becomes the mean of rows `neighbors[i]` (zero when empty).
    pub fn neighbor_mean(&mut self, a: Var, neighbors: Rc<Vec<Vec<usize>>>) -> Var {
        let m = self.value(a);
        let mut out = Matrix::zeros(neighbors.len(), m.cols);
        for (i, list) in neighbors.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let w = 1.0 / list.len() as f64;
            let row = out.row_mut(i);
            for &j in list {
                for (o, &x) in row.iter_mut().zip(m.row(j)) {
                    *o += w * x;
                }
            }
        }
        self.push(out, Op::NeighborMean(a, neighbors))
    }

    /// Mean over rows of `-log softmax(masked row)[target]`, as a 1x1 value.
    /// Callers guarantee each target is allowed by its mask.
    pub fn masked_nll(&mut self, logits: Var, mask: &[bool], targets: Rc<Vec<usize>>) -> Var {
        let l = self.value(logits);
        assert_eq!(targets.len(), l.rows, "one target per row");
        let mut probs = Matrix::zeros(l.rows, l.cols);
        let mut loss = 0.0;
        for r in 0..l.rows {
            let allowed = |c: usize| mask[r * l.cols + c];
            let max = (0..l.cols)
                .filter(|&c| allowed(c))
                .map(|c| l.get(r, c))
                .fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = (0..l.cols)
                .filter(|&c| allowed(c))
                .map(|c| (l.get(r, c) - max).exp())
                .sum();
            let lse = max + total.ln();
            for c in 0..l.cols {
                if allowed(c) {
                    probs.set(r, c, (l.get(r, c) - lse).exp());
                }
            }
            loss += lse - l.get(r, targets[r]);
        }
        let n = l.rows.max(1) as f64;
        self.push(
            Matrix::from_vec(1, 1, vec![loss / n]),
            Op::MaskedNll {
                logits,
                probs,
                targets,
            },
        )
    }

    /// Adjoints of every node with respect to the 1x1 node `out`.
    pub fn backward(&self, out: Var) -> Vec<Option<Matrix>> {
        assert_eq!(self.value(out).shape(), (1, 1), "backward from a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Matrix::filled(1, 1, 1.0));
        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, g.matmul_t(self.value(*b)));
                    acc(&mut grads, *b, self.value(*a).t_matmul(&g));
                }
                Op::MatMulT(a, b) => {
                    acc(&mut grads, *a, g.matmul(self.value(*b)));
                    acc(&mut grads, *b, g.t_matmul(self.value(*a)));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (x, y) in gb.data.iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *bias, gb);
                    acc(&mut grads, *a, g.clone());
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.scaled(*s)),
                Op::Silu(a) => {
                    let x = self.value(*a);
                    let data = x
                        .data
                        .iter()
                        .zip(&g.data)
                        .map(|(&t, &d)| {
                            let s = 1.0 / (1.0 + (-t).exp());
                            d * s * (1.0 + t * (1.0 - s))
                        })
                        .collect();
                    acc(&mut grads, *a, Matrix::from_vec(x.rows, x.cols, data));
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normed,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let n = g.cols as f64;
                    let mut gx = Matrix::zeros(g.rows, g.cols);
                    let mut gg = Matrix::zeros(1, g.cols);
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        let dy = g.row(r);
                        let h = normed.row(r);
                        let dh: Vec<f64> = dy.iter().zip(&gv.data).map(|(a, b)| a * b).collect();
                        let mean_dh = dh.iter().sum::<f64>() / n;
                        let mean_dhh = dh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / n;
                        for c in 0..g.cols {
                            gx.set(r, c, inv_std[r] * (dh[c] - mean_dh - h[c] * mean_dhh));
                            gg.data[c] += dy[c] * h[c];
                            gb.data[c] += dy[c];
                        }
                    }
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *gain, gg);
                    acc(&mut grads, *bias, gb);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut gx = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                        for c in 0..y.cols {
                            gx.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols;
                        let part = Matrix::from_fn(g.rows, w, |r, c| g.get(r, offset + c));
                        acc(&mut grads, p, part);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let h = self.value(p).rows;
                        let part = Matrix::from_vec(
                            h,
                            g.cols,
                            g.data[offset * g.cols..(offset + h) * g.cols].to_vec(),
                        );
                        acc(&mut grads, p, part);
                        offset += h;
                    }
                }
                Op::GatherRows(a, index) => {
                    let src = self.value(*a);
                    let mut gx = Matrix::zeros(src.rows, src.cols);
                    for (r, &i) in index.iter().enumerate() {
                        for (x, y) in gx.row_mut(i).iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut gx = Matrix::zeros(src.rows, src.cols);
                    for r in 0..g.rows {
                        gx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::Rope {
                    x,
                    positions,
                    head_dim,
                } => acc(&mut grads, *x, rope_apply(&g, positions, *head_dim, -1.0)),
                Op::NeighborMean(a, neighbors) => {
                    let src = self.value(*a);
                    let mut gx = Matrix::zeros(src.rows, src.cols);
                    for (i, list) in neighbors.iter().enumerate() {
                        if list.is_empty() {
                            continue;
                        }
                        let w = 1.0 / list.len() as f64;
                        for &j in list {
                            for (x, &y) in gx.row_mut(j).iter_mut().zip(g.row(i)) {
                                *x += w * y;
                            }
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::MaskedNll {
                    logits,
                    probs,
                    targets,
                } => {
                    let scale = g.data[0] / probs.rows.max(1) as f64;
                    let mut gx = probs.scaled(scale);
                    for (r, &t) in targets.iter().enumerate() {
                        let v = gx.get(r, t) - scale;
                        gx.set(r, t, v);
                    }
                    acc(&mut grads, *logits, gx);
                }
            }
            grads[i] = Some(g);
        }
        grads
    }
}
