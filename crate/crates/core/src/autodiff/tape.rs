//! Reverse-mode differentiation over a dynamically recorded tape.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Nodes
//! are appended in topological order, so the backward pass is a single
//! reverse sweep that visits each node exactly once. Parameters live outside
//! the tape in a [`ParamStore`]; [`Tape::backward`] returns a [`GradMap`]
//! aligned with the store, with zeros for parameters the loss never touched.
//!
//! Shape mismatches and non-finite outputs are contract violations and
//! panic, naming the offending operation.

use rand::Rng;

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a value on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name {name:?}"
        );
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId(self.names.len() - 1)
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name_of(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }
}

/// Per-parameter gradients, aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GradMap {
    grads: Vec<Tensor>,
}

impl GradMap {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradMap {
            grads: store.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &GradMap) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_scaled(b, 1.0);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for g in &mut self.grads {
            g.scale(alpha);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }
}

enum Op {
    Constant,
    Param(ParamId),
    Add(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Mul(ValueId, ValueId),
    MatMul(ValueId, ValueId),
    MatVec(ValueId, ValueId),
    Concat(Vec<ValueId>),
    Slice { src: ValueId, start: usize },
    Row { src: ValueId, index: usize },
    Tanh(ValueId),
    Sigmoid(ValueId),
    Relu(ValueId),
    Log(ValueId),
    Softmax(ValueId),
    Sum(ValueId),
    Mean(ValueId),
    ScalarMul(ValueId, f64),
    ScaleBy { vec: ValueId, scalar: ValueId },
    Dropout { src: ValueId, mask: Vec<f64> },
    Embed { table: ValueId, ids: Vec<usize> },
    CrossEntropy { logits: ValueId, target: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MatMul(..) => "matmul",
            Op::MatVec(..) => "matvec",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::Row { .. } => "row",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::Log(_) => "log",
            Op::Softmax(_) => "softmax",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::ScalarMul(..) => "scalar_mul",
            Op::ScaleBy { .. } => "scale_by",
            Op::Dropout { .. } => "dropout",
            Op::Embed { .. } => "embedding_lookup",
            Op::CrossEntropy { .. } => "cross_entropy",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A single forward pass: values plus the record needed to differentiate it.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::new() }
    }

    pub fn value(&self, v: ValueId) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> ValueId {
        if !value.all_finite() {
            panic!("{}: non-finite output", op.name());
        }
        self.nodes.push(Node { value, op });
        ValueId(self.nodes.len() - 1)
    }

    /// Leaf holding a trainable parameter; gradients flow into the returned
    /// [`GradMap`] slot.
    pub fn param(&mut self, id: ParamId) -> ValueId {
        let value = self.store.get(id).clone();
        self.push(value, Op::Param(id))
    }

    pub fn param_named(&mut self, name: &str) -> ValueId {
        let id = self
            .store
            .id_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        self.param(id)
    }

    /// Leaf holding a non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> ValueId {
        self.push(value, Op::Constant)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "add: shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "sub: shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(out, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "mul: shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(out, Op::Mul(a, b))
    }

    /// `(m x k) . (k x n) -> (m x n)`.
    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.rank(), 2, "matmul: lhs must be rank 2");
        assert_eq!(tb.rank(), 2, "matmul: rhs must be rank 2");
        let (m, k) = (ta.n_rows(), ta.n_cols());
        let (k2, n) = (tb.n_rows(), tb.n_cols());
        assert_eq!(k, k2, "matmul: inner dimensions {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = ta.row(i);
            for (l, &av) in arow.iter().enumerate() {
                let brow = tb.row(l);
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        let out = Tensor::from_vec(&[m, n], out);
        self.push(out, Op::MatMul(a, b))
    }

    /// `(m x k) . (k) -> (m)`.
    pub fn matvec(&mut self, a: ValueId, x: ValueId) -> ValueId {
        let (ta, tx) = (self.value(a), self.value(x));
        assert_eq!(ta.rank(), 2, "matvec: lhs must be rank 2");
        assert_eq!(tx.rank(), 1, "matvec: rhs must be rank 1");
        let (m, k) = (ta.n_rows(), ta.n_cols());
        assert_eq!(k, tx.len(), "matvec: inner dimensions {k} vs {}", tx.len());
        let xd = tx.data();
        let mut out = vec![0.0; m];
        for (i, o) in out.iter_mut().enumerate() {
            *o = ta.row(i).iter().zip(xd).map(|(a, b)| a * b).sum();
        }
        let out = Tensor::vector(out);
        self.push(out, Op::MatVec(a, x))
    }

    /// Concatenation of rank-1 tensors.
    pub fn concat(&mut self, parts: &[ValueId]) -> ValueId {
        assert!(!parts.is_empty(), "concat: empty input");
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.rank(), 1, "concat: rank-1 inputs only");
            data.extend_from_slice(t.data());
        }
        let out = Tensor::vector(data);
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Contiguous sub-vector `[start, start + len)` of a rank-1 tensor.
    pub fn slice(&mut self, src: ValueId, start: usize, len: usize) -> ValueId {
        let t = self.value(src);
        assert_eq!(t.rank(), 1, "slice: rank-1 input only");
        assert!(start + len <= t.len(), "slice: out of bounds");
        let out = Tensor::vector(t.data()[start..start + len].to_vec());
        self.push(out, Op::Slice { src, start })
    }

    /// Row of a rank-2 tensor as a rank-1 tensor.
    pub fn row(&mut self, src: ValueId, index: usize) -> ValueId {
        let t = self.value(src);
        assert_eq!(t.rank(), 2, "row: rank-2 input only");
        assert!(index < t.n_rows(), "row: index out of bounds");
        let out = Tensor::vector(t.row(index).to_vec());
        self.push(out, Op::Row { src, index })
    }

    fn map_unary(&mut self, a: ValueId, op: Op, f: impl Fn(f64) -> f64) -> ValueId {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::from_vec(t.shape(), data);
        self.push(out, op)
    }

    pub fn tanh(&mut self, a: ValueId) -> ValueId {
        self.map_unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        self.map_unary(a, Op::Sigmoid(a), |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        self.map_unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn log(&mut self, a: ValueId) -> ValueId {
        self.map_unary(a, Op::Log(a), f64::ln)
    }

    /// Numerically stable softmax over a rank-1 tensor.
    pub fn softmax(&mut self, a: ValueId) -> ValueId {
        let t = self.value(a);
        assert_eq!(t.rank(), 1, "softmax: rank-1 input only");
        assert!(!t.is_empty(), "softmax: empty input");
        let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = t.data().iter().map(|&x| (x - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let out = Tensor::vector(exps.into_iter().map(|e| e / z).collect());
        self.push(out, Op::Softmax(a))
    }

    pub fn sum(&mut self, a: ValueId) -> ValueId {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: ValueId) -> ValueId {
        let t = self.value(a);
        assert!(!t.is_empty(), "mean: empty input");
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Multiplication by a compile-time constant.
    pub fn scalar_mul(&mut self, a: ValueId, c: f64) -> ValueId {
        self.map_unary(a, Op::ScalarMul(a, c), |x| c * x)
    }

    /// Elementwise scale of `vec` by a one-element tape value.
    pub fn scale_by(&mut self, vec: ValueId, scalar: ValueId) -> ValueId {
        let s = self.value(scalar);
        assert_eq!(s.len(), 1, "scale_by: scalar must have one element");
        let s = s.item();
        let t = self.value(vec);
        let data = t.data().iter().map(|&x| s * x).collect();
        let out = Tensor::from_vec(t.shape(), data);
        self.push(out, Op::ScaleBy { vec, scalar })
    }

    /// Inverted dropout: each entry is kept with probability `keep` and
    /// scaled by `1/keep`. Call only at train time; at eval time apply
    /// nothing.
    pub fn dropout(&mut self, src: ValueId, keep: f64, rng: &mut impl Rng) -> ValueId {
        assert!(keep > 0.0 && keep <= 1.0, "dropout: keep must be in (0, 1]");
        let t = self.value(src);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::from_vec(t.shape(), data);
        self.push(out, Op::Dropout { src, mask })
    }

    /// Gathers rows of an embedding table: `(ids.len() x d)`.
    pub fn embed(&mut self, table: ValueId, ids: &[usize]) -> ValueId {
        let t = self.value(table);
        assert_eq!(t.rank(), 2, "embedding_lookup: table must be rank 2");
        assert!(!ids.is_empty(), "embedding_lookup: empty id list");
        let d = t.n_cols();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < t.n_rows(), "embedding_lookup: id {id} out of range");
            data.extend_from_slice(t.row(id));
        }
        let out = Tensor::from_vec(&[ids.len(), d], data);
        self.push(out, Op::Embed { table, ids: ids.to_vec() })
    }

    /// Cross-entropy of a logit vector against a class index, as a
    /// one-element tensor. Uses a stable log-sum-exp.
    pub fn cross_entropy(&mut self, logits: ValueId, target: usize) -> ValueId {
        let t = self.value(logits);
        assert_eq!(t.rank(), 1, "cross_entropy: logits must be rank 1");
        assert!(target < t.len(), "cross_entropy: target {target} out of range");
        let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + t.data().iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - t.data()[target];
        self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, target })
    }

    /// Reverse sweep from a one-element loss node. Returns gradients for
    /// every parameter; parameters the loss does not reach get zeros.
    pub fn backward(&self, loss: ValueId) -> Result<GradMap> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward: loss must be a scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = GradMap::zeros_like(self.store);

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.get_mut(*id).add_scaled(&g, 1.0),
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, |ga| ga.add_scaled(&g, 1.0));
                    self.accumulate(&mut grads, *b, |gb| gb.add_scaled(&g, 1.0));
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, *a, |ga| ga.add_scaled(&g, 1.0));
                    self.accumulate(&mut grads, *b, |gb| gb.add_scaled(&g, -1.0));
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a).clone(), self.value(*b).clone());
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), bi) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                            *o += gi * bi;
                        }
                    });
                    self.accumulate(&mut grads, *b, |gb| {
                        for ((o, gi), ai) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                            *o += gi * ai;
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = (ta.n_rows(), ta.n_cols());
                    let n = tb.n_cols();
                    // dA = g . B^T
                    let (ta, tb) = (ta.clone(), tb.clone());
                    self.accumulate(&mut grads, *a, |ga| {
                        for i in 0..m {
                            let grow = &g.data()[i * n..(i + 1) * n];
                            let garow = ga.row_mut(i);
                            for l in 0..k {
                                garow[l] += grow.iter().zip(tb.row(l)).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                    // dB = A^T . g
                    self.accumulate(&mut grads, *b, |gb| {
                        for i in 0..m {
                            let arow = ta.row(i);
                            let grow = &g.data()[i * n..(i + 1) * n];
                            for (l, &av) in arow.iter().enumerate() {
                                let gbrow = gb.row_mut(l);
                                for (o, &gv) in gbrow.iter_mut().zip(grow) {
                                    *o += av * gv;
                                }
                            }
                        }
                    });
                }
                Op::MatVec(a, x) => {
                    let (ta, tx) = (self.value(*a).clone(), self.value(*x).clone());
                    let (m, k) = (ta.n_rows(), ta.n_cols());
                    self.accumulate(&mut grads, *a, |ga| {
                        for i in 0..m {
                            let gi = g.data()[i];
                            let garow = ga.row_mut(i);
                            for (o, &xv) in garow.iter_mut().zip(tx.data()) {
                                *o += gi * xv;
                            }
                        }
                    });
                    self.accumulate(&mut grads, *x, |gx| {
                        for l in 0..k {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += ta.row(i)[l] * g.data()[i];
                            }
                            gx.data_mut()[l] += acc;
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        let gpart = &g.data()[offset..offset + len];
                        self.accumulate(&mut grads, p, |gp| {
                            for (o, &gv) in gp.data_mut().iter_mut().zip(gpart) {
                                *o += gv;
                            }
                        });
                        offset += len;
                    }
                }
                Op::Slice { src, start } => {
                    let len = g.len();
                    self.accumulate(&mut grads, *src, |gs| {
                        for (o, &gv) in gs.data_mut()[*start..start + len].iter_mut().zip(g.data()) {
                            *o += gv;
                        }
                    });
                }
                Op::Row { src, index } => {
                    self.accumulate(&mut grads, *src, |gs| {
                        for (o, &gv) in gs.row_mut(*index).iter_mut().zip(g.data()) {
                            *o += gv;
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.clone();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                            *o += gi * (1.0 - yi * yi);
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.clone();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                            *o += gi * yi * (1.0 - yi);
                        }
                    });
                }
                Op::Relu(a) => {
                    let x = self.value(*a).clone();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), xi) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                            *o += if *xi > 0.0 { *gi } else { 0.0 };
                        }
                    });
                }
                Op::Log(a) => {
                    let x = self.value(*a).clone();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), xi) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                            *o += gi / xi;
                        }
                    });
                }
                Op::Softmax(a) => {
                    let y = node.value.clone();
                    let dot: f64 = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
                    self.accumulate(&mut grads, *a, |ga| {
                        for ((o, gi), yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                            *o += yi * (gi - dot);
                        }
                    });
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    self.accumulate(&mut grads, *a, |ga| {
                        for o in ga.data_mut() {
                            *o += gv;
                        }
                    });
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len() as f64;
                    let gv = g.item() / n;
                    self.accumulate(&mut grads, *a, |ga| {
                        for o in ga.data_mut() {
                            *o += gv;
                        }
                    });
                }
                Op::ScalarMul(a, c) => {
                    let c = *c;
                    self.accumulate(&mut grads, *a, |ga| ga.add_scaled(&g, c));
                }
                Op::ScaleBy { vec, scalar } => {
                    let s = self.value(*scalar).item();
                    let v = self.value(*vec).clone();
                    self.accumulate(&mut grads, *vec, |gv| gv.add_scaled(&g, s));
                    let ds: f64 = g.data().iter().zip(v.data()).map(|(gi, vi)| gi * vi).sum();
                    self.accumulate(&mut grads, *scalar, |gs| gs.data_mut()[0] += ds);
                }
                Op::Dropout { src, mask } => {
                    self.accumulate(&mut grads, *src, |gs| {
                        for ((o, gi), mi) in gs.data_mut().iter_mut().zip(g.data()).zip(mask) {
                            *o += gi * mi;
                        }
                    });
                }
                Op::Embed { table, ids } => {
                    let d = self.value(*table).n_cols();
                    self.accumulate(&mut grads, *table, |gt| {
                        for (r, &id) in ids.iter().enumerate() {
                            let grow = &g.data()[r * d..(r + 1) * d];
                            for (o, &gv) in gt.row_mut(id).iter_mut().zip(grow) {
                                *o += gv;
                            }
                        }
                    });
                }
                Op::CrossEntropy { logits, target } => {
                    let t = self.value(*logits);
                    let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = t.data().iter().map(|&x| (x - max).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    let gv = g.item();
                    let target = *target;
                    self.accumulate(&mut grads, *logits, |gl| {
                        for (j, (o, e)) in gl.data_mut().iter_mut().zip(&exps).enumerate() {
                            let soft = e / z;
                            *o += gv * (soft - if j == target { 1.0 } else { 0.0 });
                        }
                    });
                }
            }
        }
        Ok(out)
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Tensor>],
        v: ValueId,
        f: impl FnOnce(&mut Tensor),
    ) {
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.nodes[v.0].value.shape()));
        }
        f(slot.as_mut().expect("just initialized"));
    }
}
