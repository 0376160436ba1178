//! Reverse-mode differentiation over a recorded tape.
//!
//! Every operation appends a node whose inputs are earlier nodes, so insertion
//! order is a topological order and the backward sweep is a single reverse
//! pass. A tape is rebuilt for each user context; parameters are read from a
//! borrowed [`ParamSet`] and never copied.

use std::borrow::Cow;
use std::collections::HashMap;

use super::ops::{self, axpy, dot, mat_t_vec_raw, matvec_raw};
use super::params::{ParamId, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Lower/upper clamp applied to probabilities before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    ParamRow(ParamId, usize),
    MatVec(NodeId, NodeId),
    MatTVec(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    Stack(Vec<NodeId>),
    Dot(NodeId, NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Softmax(NodeId),
    Norm2(NodeId),
    Bce(NodeId, f64),
    BceLogit(NodeId, f64),
}

impl Op {
    fn kind(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::ParamRow(..) => "param_row",
            Op::MatVec(..) => "matvec",
            Op::MatTVec(..) => "mat_t_vec",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Concat(_) => "concat",
            Op::Stack(_) => "stack",
            Op::Dot(..) => "dot",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::Softmax(_) => "softmax",
            Op::Norm2(_) => "norm2",
            Op::Bce(..) => "bce",
            Op::BceLogit(..) => "bce_logit",
        }
    }
}

/// Gradients produced by [`Tape::backward`], one dense tensor per parameter
/// of the bound [`ParamSet`], zero for parameters the loss never touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros(params: &ParamSet) -> Self {
        Self {
            params: params.zeros_like(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0]
    }

    /// Element-wise `self += other`, in parameter order.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.params {
            for x in t.data_mut() {
                *x *= factor;
            }
        }
    }
}

/// The computation record: an append-only list of operations and their
/// forward values.
pub struct Tape<'p> {
    params: Option<&'p ParamSet>,
    ops: Vec<Op>,
    values: Vec<Cow<'p, Tensor>>,
    param_nodes: HashMap<ParamId, NodeId>,
    row_nodes: HashMap<(ParamId, usize), NodeId>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    /// A tape with no trainable parameters, only constants.
    pub fn new() -> Self {
        Self {
            params: None,
            ops: Vec::new(),
            values: Vec::new(),
            param_nodes: HashMap::new(),
            row_nodes: HashMap::new(),
        }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Self {
            params: Some(params),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn data(&self, id: NodeId) -> &[f64] {
        self.values[id.0].data()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.values[id.0].shape()
    }

    /// Op kind of each node, in insertion order.
    pub fn op_kinds(&self) -> Vec<&'static str> {
        self.ops.iter().map(Op::kind).collect()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.ops.len());
        self.ops.push(op);
        self.values.push(Cow::Owned(value));
        id
    }

    fn bound(&self) -> Result<&'p ParamSet> {
        self.params
            .ok_or_else(|| Error::invalid("tape has no parameter set bound"))
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.constant(Tensor::zeros(&[len]))
    }

    /// Leaf node for a whole parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Result<NodeId> {
        if let Some(&n) = self.param_nodes.get(&id) {
            return Ok(n);
        }
        let set = self.bound()?;
        if id.0 >= set.len() {
            return Err(Error::invalid(format!("unknown parameter id {}", id.0)));
        }
        let node = NodeId(self.ops.len());
        self.ops.push(Op::Param(id));
        self.values.push(Cow::Borrowed(set.get(id)));
        self.param_nodes.insert(id, node);
        Ok(node)
    }

    pub fn param_id(&self, name: &str) -> Result<ParamId> {
        self.bound()?.expect_id(name)
    }

    pub fn param_named(&mut self, name: &str) -> Result<NodeId> {
        let id = self.bound()?.expect_id(name)?;
        self.param(id)
    }

    /// Leaf node for one row of a matrix parameter (embedding lookup).
    pub fn param_row(&mut self, id: ParamId, row: usize) -> Result<NodeId> {
        if let Some(&n) = self.row_nodes.get(&(id, row)) {
            return Ok(n);
        }
        let set = self.bound()?;
        let t = set.get(id);
        if t.rank() != 2 || row >= t.rows() {
            return Err(Error::invalid(format!(
                "row {row} out of range for {} {:?}",
                set.name(id),
                t.shape()
            )));
        }
        let value = Tensor::vector(t.row(row).to_vec());
        let node = self.push(Op::ParamRow(id, row), value);
        self.row_nodes.insert((id, row), node);
        Ok(node)
    }

    fn vec_len(&self, op: &'static str, a: NodeId) -> Result<usize> {
        let s = self.shape(a);
        if s.len() != 1 {
            return Err(Error::shape(op, s, &[]));
        }
        Ok(s[0])
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let v = ops::matvec(self.value(w), self.value(x))?;
        Ok(self.push(Op::MatVec(w, x), v))
    }

    /// `Wᵀ v`: with `w` a stack of rows, this is the `v`-weighted sum of rows.
    pub fn mat_t_vec(&mut self, w: NodeId, v: NodeId) -> Result<NodeId> {
        let (wt, vt) = (self.value(w), self.value(v));
        if wt.rank() != 2 || vt.rank() != 1 || wt.rows() != vt.len() {
            return Err(Error::shape("mat_t_vec", wt.shape(), vt.shape()));
        }
        let out = mat_t_vec_raw(wt.data(), wt.rows(), wt.cols(), vt.data());
        Ok(self.push(Op::MatTVec(w, v), Tensor::vector(out)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape("sub", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x - y).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(Op::Sub(a, b), t))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::mul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let av = self.value(a);
        let data = av.data().iter().map(|x| x * factor).collect();
        let t = Tensor::new(av.shape().to_vec(), data).expect("shape preserved");
        self.push(Op::Scale(a, factor), t)
    }

    /// `W x + b`
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = ops::sigmoid_t(self.value(a));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = ops::tanh_t(self.value(a));
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = ops::relu_t(self.value(a));
        self.push(Op::Relu(a), v)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ops::concat(&tensors)?;
        Ok(self.push(Op::Concat(parts.to_vec()), v))
    }

    /// Stacks equal-length vectors into a `[k, d]` matrix.
    pub fn stack(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let first = *rows
            .first()
            .ok_or_else(|| Error::invalid("stack of no rows"))?;
        let d = self.vec_len("stack", first)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let len = self.vec_len("stack", r)?;
            if len != d {
                return Err(Error::shape("stack", &[d], &[len]));
            }
            data.extend_from_slice(self.data(r));
        }
        let t = Tensor::matrix(rows.len(), d, data)?;
        Ok(self.push(Op::Stack(rows.to_vec()), t))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (la, lb) = (self.vec_len("dot", a)?, self.vec_len("dot", b)?);
        if la != lb {
            return Err(Error::shape("dot", &[la], &[lb]));
        }
        let v = dot(self.data(a), self.data(b));
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(v)))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = ops::sum(self.value(a));
        self.push(Op::Sum(a), v)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = ops::mean(self.value(a));
        self.push(Op::Mean(a), v)
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = ops::softmax_t(self.value(a))?;
        Ok(self.push(Op::Softmax(a), v))
    }

    /// Euclidean norm. The gradient at the origin is taken as zero.
    pub fn norm2(&mut self, a: NodeId) -> NodeId {
        let n = dot(self.data(a), self.data(a)).sqrt();
        self.push(Op::Norm2(a), Tensor::scalar(n))
    }

    /// Binary cross-entropy of a probability node against a 0/1 label, with
    /// the probability clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn bce(&mut self, prob: NodeId, label: f64) -> Result<NodeId> {
        let p = self.value(prob).item()?;
        Ok(self.push(Op::Bce(prob, label), Tensor::scalar(bce_value(p, label))))
    }

    /// [`Tape::bce`] of `σ(logit)`, evaluated without forming the
    /// probability so saturated predictions keep full precision.
    pub fn bce_logit(&mut self, logit: NodeId, label: f64) -> Result<NodeId> {
        let z = self.value(logit).item()?;
        Ok(self.push(Op::BceLogit(logit, label), Tensor::scalar(bce_logit_value(z, label))))
    }

    /// Sums a list of scalar nodes.
    pub fn add_all(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::invalid("sum of no terms"))?;
        let mut acc = first;
        for &t in rest {
            acc = self.add(acc, t)?;
        }
        Ok(acc)
    }

    /// Gradient of a scalar node with respect to every parameter of the
    /// bound set.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        Ok(self.sweep(loss)?.0)
    }

    /// Like [`Tape::backward`] but also returns the gradient reaching every
    /// node (`None` where nothing flowed).
    pub fn backward_with_nodes(&self, loss: NodeId) -> Result<(Gradients, Vec<Option<Vec<f64>>>)> {
        self.sweep(loss)
    }

    fn sweep(&self, loss: NodeId) -> Result<(Gradients, Vec<Option<Vec<f64>>>)> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::invalid(format!(
                "loss must be scalar, got shape {:?}",
                lv.shape()
            )));
        }
        let mut out = match self.params {
            Some(set) => Gradients::zeros(set),
            None => Gradients { params: Vec::new() },
        };
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.ops.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Constant => {}
                Op::Param(pid) => {
                    for (o, x) in out.params[pid.0].data_mut().iter_mut().zip(&g) {
                        *o += x;
                    }
                }
                Op::ParamRow(pid, row) => {
                    let cols = self.params.expect("bound").get(*pid).cols();
                    let dst = &mut out.params[pid.0].data_mut()[row * cols..(row + 1) * cols];
                    axpy(1.0, &g, dst);
                }
                Op::MatVec(w, x) => {
                    let wt = self.value(*w);
                    let (rows, cols) = (wt.rows(), wt.cols());
                    let xv = self.data(*x);
                    {
                        let gw = slot(&mut grads, *w, rows * cols);
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != 0.0 {
                                axpy(gr, xv, &mut gw[r * cols..(r + 1) * cols]);
                            }
                        }
                    }
                    let gx = mat_t_vec_raw(wt.data(), rows, cols, &g);
                    add_into(slot(&mut grads, *x, cols), &gx);
                }
                Op::MatTVec(w, v) => {
                    // out = Wᵀ v ; dW[r] += v_r * g ; dv_r = W[r]·g
                    let wt = self.value(*w);
                    let (rows, cols) = (wt.rows(), wt.cols());
                    let vv = self.data(*v);
                    {
                        let gw = slot(&mut grads, *w, rows * cols);
                        for (r, &vr) in vv.iter().enumerate() {
                            axpy(vr, &g, &mut gw[r * cols..(r + 1) * cols]);
                        }
                    }
                    let gv = matvec_raw(wt.data(), rows, cols, &g);
                    add_into(slot(&mut grads, *v, rows), &gv);
                }
                Op::MatMul(a, b) => {
                    let (at, bt) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (at.rows(), at.cols(), bt.cols());
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; k * n];
                    for i2 in 0..m {
                        let grow = &g[i2 * n..(i2 + 1) * n];
                        for p in 0..k {
                            let brow = &bt.data()[p * n..(p + 1) * n];
                            ga[i2 * k + p] += dot(grow, brow);
                            axpy(at.data()[i2 * k + p], grow, &mut gb[p * n..(p + 1) * n]);
                        }
                    }
                    add_into(slot(&mut grads, *a, m * k), &ga);
                    add_into(slot(&mut grads, *b, k * n), &gb);
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    add_into(slot(&mut grads, *b, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g);
                    axpy(-1.0, &g, slot(&mut grads, *b, g.len()));
                }
                Op::Mul(a, b) => {
                    let av = self.data(*a);
                    let bv = self.data(*b);
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    add_into(slot(&mut grads, *a, g.len()), &ga);
                    add_into(slot(&mut grads, *b, g.len()), &gb);
                }
                Op::Scale(a, f) => axpy(*f, &g, slot(&mut grads, *a, g.len())),
                Op::Sigmoid(a) => {
                    let y = self.data(NodeId(i));
                    let dst = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in dst.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Tanh(a) => {
                    let y = self.data(NodeId(i));
                    let dst = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in dst.iter_mut().zip(&g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Relu(a) => {
                    let x = self.data(*a);
                    let dst = slot(&mut grads, *a, g.len());
                    for ((d, gi), xi) in dst.iter_mut().zip(&g).zip(x) {
                        if *xi > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        add_into(slot(&mut grads, p, len), &g[off..off + len]);
                        off += len;
                    }
                }
                Op::Stack(rows) => {
                    let d = self.value(rows[0]).len();
                    for (r, &p) in rows.iter().enumerate() {
                        add_into(slot(&mut grads, p, d), &g[r * d..(r + 1) * d]);
                    }
                }
                Op::Dot(a, b) => {
                    let g0 = g[0];
                    let (av, bv) = (self.data(*a), self.data(*b));
                    let n = av.len();
                    axpy(g0, bv, slot(&mut grads, *a, n));
                    axpy(g0, av, slot(&mut grads, *b, n));
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    for d in slot(&mut grads, *a, n).iter_mut() {
                        *d += g[0];
                    }
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len();
                    let share = g[0] / n as f64;
                    for d in slot(&mut grads, *a, n).iter_mut() {
                        *d += share;
                    }
                }
                Op::Softmax(a) => {
                    let y = self.data(NodeId(i));
                    let gy = dot(&g, y);
                    let dst = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in dst.iter_mut().zip(&g).zip(y) {
                        *d += yi * (gi - gy);
                    }
                }
                Op::Norm2(a) => {
                    let n = self.data(NodeId(i))[0];
                    if n > 0.0 {
                        let x = self.data(*a);
                        axpy(g[0] / n, x, slot(&mut grads, *a, x.len()));
                    }
                }
                Op::BceLogit(z, y) => {
                    let zv = self.data(*z)[0];
                    let d = bce_logit_grad(zv, *y);
                    slot(&mut grads, *z, 1)[0] += g[0] * d;
                }
                Op::Bce(p, y) => {
                    let pv = self.data(*p)[0];
                    let d = bce_grad(pv, *y);
                    slot(&mut grads, *p, 1)[0] += g[0] * d;
                }
            }
            grads[i] = Some(g);
        }
        Ok((out, grads))
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-(y ln p + (1-y) ln(1-p))` on the clamped probability.
pub fn bce_value(p: f64, y: f64) -> f64 {
    let pc = clamp_prob(p);
    -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
}

fn bce_logit_bounds() -> (f64, f64) {
    (-(1.0 - PROB_CLAMP).ln(), -PROB_CLAMP.ln())
}

/// `bce_value(σ(z), y)` computed as `softplus(z) - y z`, with the clamp
/// applied as the equivalent bounds on the loss.
pub fn bce_logit_value(z: f64, y: f64) -> f64 {
    let raw = z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
    let (lo, hi) = bce_logit_bounds();
    raw.clamp(lo, hi)
}

fn bce_logit_grad(z: f64, y: f64) -> f64 {
    let raw = z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
    let (lo, hi) = bce_logit_bounds();
    if raw <= lo || raw >= hi {
        return 0.0;
    }
    ops::sigmoid(z) - y
}

fn bce_grad(p: f64, y: f64) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return 0.0;
    }
    -y / p + (1.0 - y) / (1.0 - p)
}
