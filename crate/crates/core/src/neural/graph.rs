//! Reverse-mode differentiation on a tape of matrix operations.
//!
//! Nodes are appended in evaluation order, so a single reverse sweep over
//! the tape visits every node after all of its consumers.

use super::tensor::{dot, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

const LN_EPS: f64 = 1e-5;
const NORM_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// Product that only reads the rows of `w` flagged active; inactive
    /// input features contribute nothing and receive zero gradient.
    MaskedMatMul(Var, Var, Vec<bool>),
    Add(Var, Var),
    AddRowBroadcast(Var, Var),
    /// Adds a `group x cols` matrix to every consecutive block of rows.
    AddTiled(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Tanh(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        rstd: Vec<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        group: usize,
        scale: f64,
        probs: Vec<Mat>,
    },
    ConcatCols(Vec<Var>),
    RepeatRows(Var, usize),
    GroupPowerNorm {
        x: Var,
        group: usize,
        sums: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Mat,
    },
    Sum(Var),
    SumSquares(Var),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
}

/// Computation tape. Values are kept so the backward pass can reuse them.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    macs: u64,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Multiply-accumulate operations performed so far.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (x, w) = (self.value(a), self.value(b));
        let macs = (x.rows * x.cols * w.cols) as u64;
        let out = x.matmul(w);
        self.macs += macs;
        self.push(out, Op::MatMul(a, b))
    }

    pub fn masked_matmul(&mut self, a: Var, b: Var, active: Vec<bool>) -> Var {
        let (x, w) = (self.value(a), self.value(b));
        assert_eq!(x.cols, w.rows);
        assert_eq!(active.len(), x.cols);
        let n_active = active.iter().filter(|&&f| f).count();
        let macs = (x.rows * n_active * w.cols) as u64;
        let mut out = Mat::zeros(x.rows, w.cols);
        for i in 0..x.rows {
            let xr = x.row(i);
            let o = &mut out.data[i * w.cols..(i + 1) * w.cols];
            for (k, _) in active.iter().enumerate().filter(|(_, &f)| f) {
                let a = xr[k];
                for (y, &b) in o.iter_mut().zip(w.row(k)) {
                    *y += a * b;
                }
            }
        }
        self.macs += macs;
        self.push(out, Op::MaskedMatMul(a, b, active))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// `x + bias` with `bias` a single row.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.rows, 1);
        let mut out = self.value(x).clone();
        assert_eq!(out.cols, b.cols);
        for r in 0..out.rows {
            for (y, &c) in out.row_mut(r).iter_mut().zip(&b.data) {
                *y += c;
            }
        }
        self.push(out, Op::AddRowBroadcast(x, bias))
    }

    pub fn add_tiled(&mut self, x: Var, tile: Var) -> Var {
        let t = self.value(tile);
        let mut out = self.value(x).clone();
        assert_eq!(out.cols, t.cols);
        assert_eq!(out.rows % t.rows, 0);
        for r in 0..out.rows {
            let src = t.row(r % t.rows);
            for (y, &c) in out.row_mut(r).iter_mut().zip(src) {
                *y += c;
            }
        }
        self.push(out, Op::AddTiled(x, tile))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape());
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let out = Mat::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let x = self.value(a);
        let out = Mat::from_vec(x.rows, x.cols, x.data.iter().map(|v| v * s).collect());
        self.push(out, Op::Scale(a, s))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = x.data.iter().map(|&v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh())).collect();
        let out = Mat::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Mat::from_vec(x.rows, x.cols, x.data.iter().map(|v| v.tanh()).collect());
        self.push(out, Op::Tanh(a))
    }

    /// Row-wise layer normalization with gain and shift rows.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gamma), self.value(beta));
        let d = xv.cols;
        assert_eq!((g.rows, g.cols, b.rows, b.cols), (1, d, 1, d));
        let mut xhat = Mat::zeros(xv.rows, d);
        let mut out = Mat::zeros(xv.rows, d);
        let mut rstd = Vec::with_capacity(xv.rows);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mu = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(s);
            for c in 0..d {
                let h = (row[c] - mu) * s;
                *xhat.at_mut(r, c) = h;
                *out.at_mut(r, c) = h * g.data[c] + b.data[c];
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd })
    }

    /// Single-head scaled dot-product attention applied independently to
    /// each consecutive group of `group` rows.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, group: usize) -> Var {
        let (qm, km, vm) = (self.value(q), self.value(k), self.value(v));
        assert_eq!(qm.shape(), km.shape());
        assert_eq!(qm.rows, vm.rows);
        assert_eq!(qm.rows % group, 0);
        let d = qm.cols;
        let scale = 1.0 / (d as f64).sqrt();
        let n_groups = qm.rows / group;
        let macs = (n_groups * group * group * (d + vm.cols)) as u64;
        let mut out = Mat::zeros(qm.rows, vm.cols);
        let mut probs = Vec::with_capacity(n_groups);
        for gi in 0..n_groups {
            let r0 = gi * group;
            let mut p = Mat::zeros(group, group);
            for i in 0..group {
                let qi = qm.row(r0 + i);
                let row = p.row_mut(i);
                for (j, s) in row.iter_mut().enumerate() {
                    *s = dot(qi, km.row(r0 + j)) * scale;
                }
                softmax_in_place(row);
            }
            for i in 0..group {
                let o = out.row_mut(r0 + i);
                for j in 0..group {
                    let w = p.at(i, j);
                    for (x, &y) in o.iter_mut().zip(vm.row(r0 + j)) {
                        *x += w * y;
                    }
                }
            }
            probs.push(p);
        }
        self.macs += macs;
        self.push(out, Op::Attention { q, k, v, group, scale, probs })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for p in parts {
                let m = self.value(*p);
                assert_eq!(m.rows, rows, "concat row mismatch");
                out.row_mut(r)[c0..c0 + m.cols].copy_from_slice(m.row(r));
                c0 += m.cols;
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Repeats each row `n` times in place: row `i` becomes rows
    /// `i*n..(i+1)*n`.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Var {
        let x = self.value(a);
        let mut out = Mat::zeros(x.rows * n, x.cols);
        for r in 0..x.rows {
            for k in 0..n {
                out.row_mut(r * n + k).copy_from_slice(x.row(r));
            }
        }
        self.push(out, Op::RepeatRows(a, n))
    }

    /// Scales each consecutive block of `group` rows to average power 1
    /// per entry.
    pub fn group_power_norm(&mut self, a: Var, group: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.rows % group, 0);
        let per = group * x.cols;
        let mut out = x.clone();
        let mut sums = Vec::with_capacity(x.rows / group);
        for chunk in out.data.chunks_mut(per) {
            let s = chunk.iter().map(|v| v * v).sum::<f64>() + NORM_EPS;
            let f = (per as f64 / s).sqrt();
            chunk.iter_mut().for_each(|v| *v *= f);
            sums.push(s);
        }
        self.push(out, Op::GroupPowerNorm { x: a, group, sums })
    }

    /// Mean cross-entropy of row-wise softmax against class targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>) -> Var {
        let l = self.value(logits);
        assert_eq!(l.rows, targets.len());
        let mut probs = l.clone();
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = probs.row_mut(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            softmax_in_place(row);
        }
        let out = Mat::filled(1, 1, loss / l.rows as f64);
        self.push(out, Op::CrossEntropy { logits, targets, probs })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Mat::filled(1, 1, s), Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().map(|v| v * v).sum();
        self.push(Mat::filled(1, 1, s), Op::SumSquares(a))
    }

    /// Gradients of the scalar `loss` with respect to every node; `None`
    /// for nodes the loss does not depend on.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be a scalar");
        let mut g: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        g[loss.0] = Some(Mat::filled(1, 1, 1.0));
        for i in (0..=loss.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(&node.op, &node.value, &dy, &mut g);
            g[i] = Some(dy);
        }
        Grads(g)
    }

    fn propagate(&self, op: &Op, y: &Mat, dy: &Mat, g: &mut [Option<Mat>]) {
        let acc = |g: &mut [Option<Mat>], v: Var, d: Mat| match &mut g[v.0] {
            Some(m) => m.add_assign(&d),
            slot => *slot = Some(d),
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, w) = (self.value(*a), self.value(*b));
                acc(g, *a, dy.matmul_nt(w));
                acc(g, *b, x.matmul_tn(dy));
            }
            Op::MaskedMatMul(a, b, active) => {
                let (x, w) = (self.value(*a), self.value(*b));
                let mut dx = Mat::zeros(x.rows, x.cols);
                let mut dw = Mat::zeros(w.rows, w.cols);
                for r in 0..x.rows {
                    let dyr = dy.row(r);
                    for (k, _) in active.iter().enumerate().filter(|(_, &f)| f) {
                        *dx.at_mut(r, k) = dot(dyr, w.row(k));
                        let xv = x.at(r, k);
                        for (d, &e) in dw.row_mut(k).iter_mut().zip(dyr) {
                            *d += xv * e;
                        }
                    }
                }
                acc(g, *a, dx);
                acc(g, *b, dw);
            }
            Op::Add(a, b) => {
                acc(g, *a, dy.clone());
                acc(g, *b, dy.clone());
            }
            Op::AddRowBroadcast(x, bias) => {
                acc(g, *x, dy.clone());
                let mut db = Mat::zeros(1, dy.cols);
                for r in 0..dy.rows {
                    for (s, &v) in db.data.iter_mut().zip(dy.row(r)) {
                        *s += v;
                    }
                }
                acc(g, *bias, db);
            }
            Op::AddTiled(x, tile) => {
                acc(g, *x, dy.clone());
                let t = self.value(*tile);
                let mut dt = Mat::zeros(t.rows, t.cols);
                for r in 0..dy.rows {
                    for (s, &v) in dt.row_mut(r % t.rows).iter_mut().zip(dy.row(r)) {
                        *s += v;
                    }
                }
                acc(g, *tile, dt);
            }
            Op::Mul(a, b) => {
                let (x, w) = (self.value(*a), self.value(*b));
                let da = dy.data.iter().zip(&w.data).map(|(d, v)| d * v).collect();
                let db = dy.data.iter().zip(&x.data).map(|(d, v)| d * v).collect();
                acc(g, *a, Mat::from_vec(dy.rows, dy.cols, da));
                acc(g, *b, Mat::from_vec(dy.rows, dy.cols, db));
            }
            Op::Scale(a, s) => {
                acc(g, *a, Mat::from_vec(dy.rows, dy.cols, dy.data.iter().map(|d| d * s).collect()));
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                let d = x
                    .data
                    .iter()
                    .zip(&dy.data)
                    .map(|(&v, &e)| {
                        let t = (GELU_C * (v + 0.044715 * v * v * v)).tanh();
                        let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
                        e * (0.5 * (1.0 + t) + 0.5 * v * dt)
                    })
                    .collect();
                acc(g, *a, Mat::from_vec(dy.rows, dy.cols, d));
            }
            Op::Tanh(a) => {
                let d = y.data.iter().zip(&dy.data).map(|(t, e)| e * (1.0 - t * t)).collect();
                acc(g, *a, Mat::from_vec(dy.rows, dy.cols, d));
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let gm = self.value(*gamma);
                let d = xhat.cols;
                let mut dx = Mat::zeros(xhat.rows, d);
                let mut dg = Mat::zeros(1, d);
                let mut db = Mat::zeros(1, d);
                for r in 0..xhat.rows {
                    let (h, e) = (xhat.row(r), dy.row(r));
                    let dh: Vec<f64> = (0..d).map(|c| e[c] * gm.data[c]).collect();
                    let m1 = dh.iter().sum::<f64>() / d as f64;
                    let m2 = dot(&dh, h) / d as f64;
                    for c in 0..d {
                        *dx.at_mut(r, c) = rstd[r] * (dh[c] - m1 - h[c] * m2);
                        dg.data[c] += e[c] * h[c];
                        db.data[c] += e[c];
                    }
                }
                acc(g, *x, dx);
                acc(g, *gamma, dg);
                acc(g, *beta, db);
            }
            Op::Attention { q, k, v, group, scale, probs } => {
                let (qm, km, vm) = (self.value(*q), self.value(*k), self.value(*v));
                let n = *group;
                let mut dq = Mat::zeros(qm.rows, qm.cols);
                let mut dk = Mat::zeros(km.rows, km.cols);
                let mut dv = Mat::zeros(vm.rows, vm.cols);
                for (gi, p) in probs.iter().enumerate() {
                    let r0 = gi * n;
                    for i in 0..n {
                        let dyi = dy.row(r0 + i);
                        let dp: Vec<f64> = (0..n).map(|j| dot(dyi, vm.row(r0 + j))).collect();
                        let pr = p.row(i);
                        let inner = dot(&dp, pr);
                        for j in 0..n {
                            let pij = pr[j];
                            for (a, &b) in dv.row_mut(r0 + j).iter_mut().zip(dyi) {
                                *a += pij * b;
                            }
                            let ds = pij * (dp[j] - inner) * scale;
                            if ds != 0.0 {
                                for c in 0..qm.cols {
                                    *dq.at_mut(r0 + i, c) += ds * km.at(r0 + j, c);
                                    *dk.at_mut(r0 + j, c) += ds * qm.at(r0 + i, c);
                                }
                            }
                        }
                    }
                }
                acc(g, *q, dq);
                acc(g, *k, dk);
                acc(g, *v, dv);
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for p in parts {
                    let cols = self.value(*p).cols;
                    let mut d = Mat::zeros(dy.rows, cols);
                    for r in 0..dy.rows {
                        d.row_mut(r).copy_from_slice(&dy.row(r)[c0..c0 + cols]);
                    }
                    acc(g, *p, d);
                    c0 += cols;
                }
            }
            Op::RepeatRows(a, n) => {
                let x = self.value(*a);
                let mut d = Mat::zeros(x.rows, x.cols);
                for r in 0..dy.rows {
                    for (s, &v) in d.row_mut(r / n).iter_mut().zip(dy.row(r)) {
                        *s += v;
                    }
                }
                acc(g, *a, d);
            }
            Op::GroupPowerNorm { x, group, sums } => {
                let xm = self.value(*x);
                let per = group * xm.cols;
                let mut d = Mat::zeros(xm.rows, xm.cols);
                for (gi, ((z, e), out)) in
                    xm.data.chunks(per).zip(dy.data.chunks(per)).zip(d.data.chunks_mut(per)).enumerate()
                {
                    let s = sums[gi];
                    let f = (per as f64 / s).sqrt();
                    let ze = dot(z, e) / s;
                    for ((o, &zi), &ei) in out.iter_mut().zip(z).zip(e) {
                        *o = f * (ei - zi * ze);
                    }
                }
                acc(g, *x, d);
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let s = dy.data[0] / targets.len() as f64;
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    *d.at_mut(r, t) -= 1.0;
                    d.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                acc(g, *logits, d);
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                acc(g, *a, Mat::filled(x.rows, x.cols, dy.data[0]));
            }
            Op::SumSquares(a) => {
                let x = self.value(*a);
                let d = x.data.iter().map(|v| 2.0 * v * dy.data[0]).collect();
                acc(g, *a, Mat::from_vec(x.rows, x.cols, d));
            }
        }
    }
}

/// Result of a backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Grads(Vec<Option<Mat>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.0[v.0].as_ref()
    }

    /// Gradient of `v`, zeros of the given shape when the loss does not
    /// depend on it.
    pub fn get_or_zeros(&self, v: Var, rows: usize, cols: usize) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| Mat::zeros(rows, cols))
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    row.iter_mut().for_each(|v| *v /= s);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_twice_the_input() {
        let mut g = Graph::new();
        let w = g.leaf(Mat::from_vec(2, 2, vec![0.5, -1.25, 3.0, 0.0]));
        let l = g.sum_squares(w);
        let gr = g.backward(l);
        assert_eq!(gr.get(w).unwrap().data, vec![1.0, -2.5, 6.0, 0.0]);
    }

    #[test]
    fn masked_rows_get_exactly_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.0]));
        let w = g.leaf(Mat::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]));
        let y = g.masked_matmul(x, w, vec![true, false, true]);
        assert_eq!(g.macs(), 2 * 2 * 2);
        let l = g.sum_squares(y);
        let gr = g.backward(l);
        let dw = gr.get(w).unwrap();
        assert_eq!(dw.row(1), &[0.0, 0.0]);
        assert!(dw.row(0).iter().all(|v| *v != 0.0));
        let dx = gr.get(x).unwrap();
        assert_eq!((dx.at(0, 1), dx.at(1, 1)), (0.0, 0.0));
    }

    #[test]
    fn power_norm_hits_unit_power() {
        let mut g = Graph::new();
        let x = g.leaf(Mat::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]));
        let y = g.group_power_norm(x, 2);
        let v = g.value(y);
        let p0 = (v.data[0].powi(2) + v.data[1].powi(2)) / 2.0;
        let p1 = (v.data[2].powi(2) + v.data[3].powi(2)) / 2.0;
        assert!((p0 - 1.0).abs() < 1e-12 && (p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let mut g = Graph::new();
        let l = g.leaf(Mat::zeros(3, 8));
        let ce = g.cross_entropy(l, vec![0, 3, 7]);
        assert!((g.value(ce).data[0] - 8f64.ln()).abs() < 1e-12);
    }
}
