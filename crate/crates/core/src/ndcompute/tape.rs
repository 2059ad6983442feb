//! Define-by-run reverse-mode tape over a closed set of operations.
//!
//! Every op computes its value eagerly when pushed and caches whatever the
//! backward rule needs. Node inputs always refer to earlier nodes, so a
//! single reverse sweep over the node list is a valid backward pass.

use super::params::{ParamId, ParamSet};
use super::tensor::{matmul, matmul_at, matmul_bt, Tensor};
use crate::error::{Error, Result};

/// Probabilities entering a log are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate backward-rule corruption, used as a negative control for
/// gradient checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Sigmoid backward uses `s` instead of `s (1 - s)`.
    SigmoidDerivative,
    /// Tanh (and recurrent cell) backward uses `1 - h` instead of `1 - h^2`.
    TanhDerivative,
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Constant,
    Param(ParamId),
    Affine {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Softmax(NodeId),
    Concat(Vec<NodeId>),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    RnnCell {
        x: NodeId,
        h: NodeId,
        wx: NodeId,
        wh: NodeId,
        b: NodeId,
    },
    SigmoidBce {
        logits: NodeId,
        targets: Vec<f64>,
        weights: Vec<f64>,
    },
    SoftmaxXent {
        logits: NodeId,
        labels: Vec<usize>,
        weights: Vec<f64>,
        probs: Vec<f64>,
    },
    GaussianKl {
        mu: NodeId,
        logvar: NodeId,
    },
    Sum(NodeId),
    Mean(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Affine { .. } => "affine",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Exp(_) => "exp",
            Op::Softmax(_) => "softmax",
            Op::Concat(_) => "concat",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::RnnCell { .. } => "rnn_cell",
            Op::SigmoidBce { .. } => "sigmoid_bce",
            Op::SoftmaxXent { .. } => "softmax_xent",
            Op::GaussianKl { .. } => "gaussian_kl",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    label: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Fault,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(logits: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        let z = &logits[r * cols..(r + 1) * cols];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let o = &mut out[r * cols..(r + 1) * cols];
        let mut s = 0.0;
        for (oi, &zi) in o.iter_mut().zip(z) {
            *oi = (zi - m).exp();
            s += *oi;
        }
        for oi in o.iter_mut() {
            *oi /= s;
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: Fault) -> Self {
        Self {
            nodes: Vec::new(),
            fault,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.0].label.as_deref()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            label: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn mismatch(&self, op: &'static str, detail: String) -> Error {
        Error::ShapeMismatch {
            node: self.nodes.len(),
            op,
            detail,
        }
    }

    fn matrix_dims(&self, op: &'static str, id: NodeId, what: &str) -> Result<(usize, usize)> {
        let t = self.value(id);
        if t.rank() != 2 {
            return Err(self.mismatch(
                op,
                format!("{what} must be a matrix, got shape {:?}", t.shape()),
            ));
        }
        Ok((t.shape()[0], t.shape()[1]))
    }

    /// Named external input (no gradient flows into it from parameters, but
    /// its gradient is still available through [`Gradients::wrt`]).
    pub fn input(&mut self, name: &str, value: Tensor) -> NodeId {
        let id = self.push(Op::Input, value);
        self.nodes[id.0].label = Some(name.to_string());
        id
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        let node = self.push(Op::Param(id), params.get(id).clone());
        self.nodes[node.0].label = Some(params.name(id).to_string());
        node
    }

    /// `x W + b` with `x: n x i`, `W: i x o`, `b: o`.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (n, i) = self.matrix_dims("affine", x, "input")?;
        let (wi, o) = self.matrix_dims("affine", w, "weight")?;
        if wi != i {
            return Err(self.mismatch(
                "affine",
                format!("input has {i} columns but weight has {wi} rows"),
            ));
        }
        let mut out = matmul(self.value(x).data(), self.value(w).data(), n, i, o);
        if let Some(b) = b {
            let bt = self.value(b);
            if bt.shape() != [o] {
                return Err(self.mismatch(
                    "affine",
                    format!("bias shape {:?}, expected [{o}]", bt.shape()),
                ));
            }
            for row in out.chunks_mut(o) {
                for (v, bv) in row.iter_mut().zip(bt.data()) {
                    *v += bv;
                }
            }
        }
        let value = Tensor::matrix(n, o, out)?;
        Ok(self.push(Op::Affine { x, w, b }, value))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    /// Softmax over the last axis of a matrix.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let (n, c) = self.matrix_dims("softmax", a, "logits")?;
        let value = Tensor::matrix(n, c, softmax_rows(self.value(a).data(), n, c))?;
        Ok(self.push(Op::Softmax(a), value))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(self.mismatch("concat", "no inputs".into()));
        }
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            dims.push(self.matrix_dims("concat", p, "part")?);
        }
        let n = dims[0].0;
        if let Some((k, _)) = dims.iter().enumerate().find(|(_, d)| d.0 != n) {
            return Err(self.mismatch(
                "concat",
                format!("part {k} has {} rows, expected {n}", dims[k].0),
            ));
        }
        let total: usize = dims.iter().map(|d| d.1).sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::matrix(n, total, data)?;
        Ok(self.push(Op::Concat(parts.to_vec()), value))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(self.mismatch(op, format!("operand shapes {sa:?} and {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), value)
    }

    /// Elman recurrent step: `tanh(x Wx + h Wh + b)`.
    pub fn rnn_cell(
        &mut self,
        x: NodeId,
        h: NodeId,
        wx: NodeId,
        wh: NodeId,
        b: NodeId,
    ) -> Result<NodeId> {
        let (n, i) = self.matrix_dims("rnn_cell", x, "input")?;
        let (nh, hd) = self.matrix_dims("rnn_cell", h, "state")?;
        let (wxi, wxo) = self.matrix_dims("rnn_cell", wx, "input weight")?;
        let (whi, who) = self.matrix_dims("rnn_cell", wh, "state weight")?;
        if nh != n || wxi != i || wxo != hd || whi != hd || who != hd {
            return Err(self.mismatch(
                "rnn_cell",
                format!(
                    "x {n}x{i}, h {nh}x{hd}, Wx {wxi}x{wxo}, Wh {whi}x{who} are inconsistent"
                ),
            ));
        }
        if self.value(b).shape() != [hd] {
            return Err(self.mismatch(
                "rnn_cell",
                format!("bias shape {:?}, expected [{hd}]", self.value(b).shape()),
            ));
        }
        let mut pre = matmul(self.value(x).data(), self.value(wx).data(), n, i, hd);
        let rec = matmul(self.value(h).data(), self.value(wh).data(), n, hd, hd);
        let bias = self.value(b).data();
        for (r, row) in pre.chunks_mut(hd).enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v + rec[r * hd + k] + bias[k]).tanh();
            }
        }
        let value = Tensor::matrix(n, hd, pre)?;
        Ok(self.push(Op::RnnCell { x, h, wx, wh, b }, value))
    }

    /// Weighted mean binary cross-entropy of `sigmoid(logits)` against
    /// `targets`, with probabilities clamped to `[1e-12, 1 - 1e-12]`.
    pub fn sigmoid_bce(
        &mut self,
        logits: NodeId,
        targets: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<NodeId> {
        let z = self.value(logits);
        if z.len() != targets.len() {
            return Err(self.mismatch(
                "sigmoid_bce",
                format!("{} logits but {} targets", z.len(), targets.len()),
            ));
        }
        let weights = match weights {
            Some(w) if w.len() != targets.len() => {
                return Err(self.mismatch("sigmoid_bce", "weight length mismatch".into()))
            }
            Some(w) => w.to_vec(),
            None => vec![1.0; targets.len()],
        };
        let total: f64 = weights.iter().sum();
        let mut loss = 0.0;
        for ((&zi, &y), &w) in z.data().iter().zip(targets).zip(&weights) {
            let p = sigmoid(zi).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        }
        let value = Tensor::scalar(if total > 0.0 { loss / total } else { 0.0 });
        Ok(self.push(
            Op::SigmoidBce {
                logits,
                targets: targets.to_vec(),
                weights,
            },
            value,
        ))
    }

    /// Weighted mean of `-log softmax(logits)[label]` in log-sum-exp form.
    /// Rows with weight zero (padding) contribute nothing.
    pub fn softmax_xent(
        &mut self,
        logits: NodeId,
        labels: &[usize],
        weights: Option<&[f64]>,
    ) -> Result<NodeId> {
        let (n, c) = self.matrix_dims("softmax_xent", logits, "logits")?;
        if labels.len() != n {
            return Err(self.mismatch(
                "softmax_xent",
                format!("{n} rows but {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: c,
            });
        }
        let weights = match weights {
            Some(w) if w.len() != n => {
                return Err(self.mismatch("softmax_xent", "weight length mismatch".into()))
            }
            Some(w) => w.to_vec(),
            None => vec![1.0; n],
        };
        let z = self.value(logits).data();
        let probs = softmax_rows(z, n, c);
        let total: f64 = weights.iter().sum();
        let mut loss = 0.0;
        for r in 0..n {
            if weights[r] == 0.0 {
                continue;
            }
            let row = &z[r * c..(r + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += weights[r] * (lse - row[labels[r]]);
        }
        let value = Tensor::scalar(if total > 0.0 { loss / total } else { 0.0 });
        Ok(self.push(
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                weights,
                probs,
            },
            value,
        ))
    }

    /// Batch mean of `KL(N(mu, exp(logvar)) || N(0, I))`.
    pub fn gaussian_kl(&mut self, mu: NodeId, logvar: NodeId) -> Result<NodeId> {
        self.same_shape("gaussian_kl", mu, logvar)?;
        let (n, _) = self.matrix_dims("gaussian_kl", mu, "mu")?;
        let total: f64 = self
            .value(mu)
            .data()
            .iter()
            .zip(self.value(logvar).data())
            .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
            .sum();
        let value = Tensor::scalar(total / n.max(1) as f64);
        Ok(self.push(Op::GaussianKl { mu, logvar }, value))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let value = Tensor::scalar(t.sum() / t.len().max(1) as f64);
        self.push(Op::Mean(a), value)
    }

    /// Reverse sweep from a scalar loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::NonScalarLoss {
                node: loss.0,
                shape: lt.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { nodes: grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |id: NodeId, delta: Tensor| match &mut grads[id.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        let out = &node.value;
        match &node.op {
            Op::Input | Op::Constant | Op::Param(_) => {}
            Op::Affine { x, w, b } => {
                let xt = self.value(*x);
                let wt = self.value(*w);
                let (n, i) = (xt.shape()[0], xt.shape()[1]);
                let o = wt.shape()[1];
                let dx = matmul_bt(g.data(), wt.data(), n, i, o);
                let dw = matmul_at(xt.data(), g.data(), n, i, o);
                acc(*x, Tensor::matrix(n, i, dx).unwrap());
                acc(*w, Tensor::matrix(i, o, dw).unwrap());
                if let Some(b) = b {
                    let mut db = vec![0.0; o];
                    for row in g.data().chunks(o) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    acc(*b, Tensor::vector(db));
                }
            }
            Op::Sigmoid(a) => {
                let faulty = self.fault == Fault::SigmoidDerivative;
                acc(
                    *a,
                    out.zip_map(g, |s, gv| {
                        if faulty {
                            gv * s
                        } else {
                            gv * s * (1.0 - s)
                        }
                    }),
                );
            }
            Op::Tanh(a) => {
                let faulty = self.fault == Fault::TanhDerivative;
                acc(
                    *a,
                    out.zip_map(g, |h, gv| {
                        if faulty {
                            gv * (1.0 - h)
                        } else {
                            gv * (1.0 - h * h)
                        }
                    }),
                );
            }
            Op::Exp(a) => acc(*a, out.zip_map(g, |e, gv| gv * e)),
            Op::Softmax(a) => {
                let c = out.cols();
                let mut d = vec![0.0; out.len()];
                for r in 0..out.rows() {
                    let s = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = s.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for k in 0..c {
                        d[r * c + k] = s[k] * (gr[k] - dot);
                    }
                }
                acc(*a, Tensor::new(out.shape().to_vec(), d).unwrap());
            }
            Op::Concat(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    let n = out.rows();
                    let mut d = Vec::with_capacity(n * pc);
                    for r in 0..n {
                        d.extend_from_slice(&g.data()[r * total + offset..r * total + offset + pc]);
                    }
                    acc(p, Tensor::matrix(n, pc, d).unwrap());
                    offset += pc;
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(self.value(*b), |gv, bv| gv * bv));
                acc(*b, g.zip_map(self.value(*a), |gv, av| gv * av));
            }
            Op::Scale(a, f) => acc(*a, g.map(|v| v * f)),
            Op::RnnCell { x, h, wx, wh, b } => {
                let faulty = self.fault == Fault::TanhDerivative;
                let dpre = out.zip_map(g, |hv, gv| {
                    if faulty {
                        gv * (1.0 - hv)
                    } else {
                        gv * (1.0 - hv * hv)
                    }
                });
                let xt = self.value(*x);
                let ht = self.value(*h);
                let (n, i) = (xt.shape()[0], xt.shape()[1]);
                let hd = ht.shape()[1];
                let dx = matmul_bt(dpre.data(), self.value(*wx).data(), n, i, hd);
                let dwx = matmul_at(xt.data(), dpre.data(), n, i, hd);
                let dh = matmul_bt(dpre.data(), self.value(*wh).data(), n, hd, hd);
                let dwh = matmul_at(ht.data(), dpre.data(), n, hd, hd);
                let mut db = vec![0.0; hd];
                for row in dpre.data().chunks(hd) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                acc(*x, Tensor::matrix(n, i, dx).unwrap());
                acc(*wx, Tensor::matrix(i, hd, dwx).unwrap());
                acc(*h, Tensor::matrix(n, hd, dh).unwrap());
                acc(*wh, Tensor::matrix(hd, hd, dwh).unwrap());
                acc(*b, Tensor::vector(db));
            }
            Op::SigmoidBce {
                logits,
                targets,
                weights,
            } => {
                let gv = g.item();
                let total: f64 = weights.iter().sum();
                let zt = self.value(*logits);
                let d = zt
                    .data()
                    .iter()
                    .zip(targets)
                    .zip(weights)
                    .map(|((&z, &y), &w)| {
                        let p = sigmoid(z);
                        if total <= 0.0 || !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                            0.0
                        } else {
                            gv * w * (p - y) / total
                        }
                    })
                    .collect();
                acc(*logits, Tensor::new(zt.shape().to_vec(), d).unwrap());
            }
            Op::SoftmaxXent {
                logits,
                labels,
                weights,
                probs,
            } => {
                let gv = g.item();
                let total: f64 = weights.iter().sum();
                let zt = self.value(*logits);
                let c = zt.cols();
                let mut d = vec![0.0; zt.len()];
                if total > 0.0 {
                    for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        for k in 0..c {
                            let onehot = if k == y { 1.0 } else { 0.0 };
                            d[r * c + k] = gv * w * (probs[r * c + k] - onehot) / total;
                        }
                    }
                }
                acc(*logits, Tensor::new(zt.shape().to_vec(), d).unwrap());
            }
            Op::GaussianKl { mu, logvar } => {
                let gv = g.item();
                let n = self.value(*mu).rows().max(1) as f64;
                acc(*mu, self.value(*mu).map(|m| gv * m / n));
                acc(
                    *logvar,
                    self.value(*logvar).map(|lv| gv * -0.5 * (1.0 - lv.exp()) / n),
                );
            }
            Op::Sum(a) => {
                let gv = g.item();
                acc(*a, Tensor::full(self.value(*a).shape(), gv));
            }
            Op::Mean(a) => {
                let t = self.value(*a);
                let gv = g.item() / t.len().max(1) as f64;
                acc(*a, Tensor::full(t.shape(), gv));
            }
        }
    }

    /// Human-readable op name of a node, for diagnostics.
    pub fn op_name(&self, id: NodeId) -> &'static str {
        self.nodes[id.0].op.name()
    }
}

/// Gradients of one backward pass, indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a node, if the node influenced it.
    pub fn wrt(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes.get(id.0).and_then(Option::as_ref)
    }

    /// Per-parameter gradients aligned with `params`; parameters that did not
    /// reach the loss (or appear several times on the tape) are summed, and
    /// unused parameters get zeros of matching shape.
    pub fn for_params(&self, tape: &Tape, params: &ParamSet) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        for (idx, node) in tape.nodes.iter().enumerate().take(self.nodes.len()) {
            if let (Op::Param(pid), Some(g)) = (&node.op, &self.nodes[idx]) {
                out[pid.index()].add_assign(g);
            }
        }
        out
    }
}
