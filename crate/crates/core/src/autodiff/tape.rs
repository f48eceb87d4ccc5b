//! Reverse-mode automatic differentiation over a Wengert tape.
//!
//! A [`Tape`] owns every tensor touched by one forward pass. Ops are recorded
//! in execution order whenever at least one input requires a gradient, and
//! [`Tape::backward`] replays them once, in reverse, accumulating
//! vector-Jacobian products. A tape and its [`Var`] handles are confined to a
//! single thread; independent tapes may run on independent threads.
//!
//! After `backward`, only leaf gradients are retained (intermediate
//! accumulators are consumed as the sweep passes their producing op).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a tensor on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum OpKind {
    Add,
    Sub,
    Mul,
    Matmul,
    Concat,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    /// Softmax over the last axis (row-wise for matrices).
    Softmax,
    /// Row gather over the first axis; repeated ids accumulate on backward.
    GatherRows(Vec<usize>),
    /// Elementwise multiply by a caller-supplied mask (inverted-dropout style).
    DropoutMask(Tensor),
    Sum,
    Mean,
    /// Metadata-only shape change; identity on values.
    Reshape,
}

/// Public op selector mirroring the primitive set, for dynamic dispatch.
#[derive(Debug, Clone)]
pub enum OpId {
    Add,
    Sub,
    Mul,
    Matmul,
    Concat,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Softmax,
    GatherRows(Vec<usize>),
    DropoutMask(Tensor),
    Sum,
    Mean,
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    is_leaf: bool,
}

struct OpRecord {
    kind: OpKind,
    inputs: Vec<Var>,
    output: Var,
}

/// Wengert tape: forward values plus the op record for one pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    ops: Vec<OpRecord>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// Register a leaf from borrowed data.
    pub fn leaf(&mut self, t: &Tensor, requires_grad: bool) -> Var {
        self.push_node(t.clone(), requires_grad, true)
    }

    /// Register a leaf, taking ownership.
    pub fn leaf_owned(&mut self, t: Tensor, requires_grad: bool) -> Var {
        self.push_node(t, requires_grad, true)
    }

    /// A non-differentiable constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push_node(t, false, true)
    }

    pub fn scalar_const(&mut self, x: f64) -> Var {
        self.constant(Tensor::scalar(x))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of a leaf after `backward`; `None` if the leaf was not
    /// reachable from the root or does not require a gradient.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.value(v).shape().to_vec(), g.clone()).expect("grad shape"))
    }

    /// Gradient of a leaf, or zeros when no gradient flowed to it.
    pub fn grad_or_zero(&self, v: Var) -> Tensor {
        self.grad(v)
            .unwrap_or_else(|| Tensor::zeros(self.value(v).shape()))
    }

    fn push_node(&mut self, value: Tensor, requires_grad: bool, is_leaf: bool) -> Var {
        self.nodes.push(Node { value, requires_grad, is_leaf });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, kind: OpKind, inputs: Vec<Var>, value: Tensor) -> Var {
        let requires = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let out = self.push_node(value, requires, false);
        // Ops whose inputs carry no gradient are not recorded.
        if requires {
            self.ops.push(OpRecord { kind, inputs, output: out });
        }
        out
    }

    /// Dynamic dispatch over the primitive set.
    pub fn forward_primitive(&mut self, op: OpId, inputs: &[Var]) -> Result<Var> {
        let want = |n: usize| -> Result<()> {
            if inputs.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{op:?} expects {n} inputs, got {}",
                    inputs.len()
                )));
            }
            Ok(())
        };
        match op {
            OpId::Add => {
                want(2)?;
                self.add(inputs[0], inputs[1])
            }
            OpId::Sub => {
                want(2)?;
                self.sub(inputs[0], inputs[1])
            }
            OpId::Mul => {
                want(2)?;
                self.mul(inputs[0], inputs[1])
            }
            OpId::Matmul => {
                want(2)?;
                self.matmul(inputs[0], inputs[1])
            }
            OpId::Concat => self.concat(inputs),
            OpId::Tanh => {
                want(1)?;
                self.tanh(inputs[0])
            }
            OpId::Sigmoid => {
                want(1)?;
                self.sigmoid(inputs[0])
            }
            OpId::Exp => {
                want(1)?;
                self.exp(inputs[0])
            }
            OpId::Log => {
                want(1)?;
                self.log(inputs[0])
            }
            OpId::Softmax => {
                want(1)?;
                self.softmax(inputs[0])
            }
            OpId::GatherRows(ids) => {
                want(1)?;
                self.gather_rows(inputs[0], &ids)
            }
            OpId::DropoutMask(mask) => {
                want(1)?;
                self.dropout_with_mask(inputs[0], &mask)
            }
            OpId::Sum => {
                want(1)?;
                self.sum(inputs[0])
            }
            OpId::Mean => {
                want(1)?;
                self.mean(inputs[0])
            }
        }
    }

    // ── Elementwise binary ops with limited broadcasting ─────────────
    //
    // Supported shape pairs: identical; scalar with anything; a length-n
    // vector against an (m, n) matrix (row broadcast).

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y)
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: fn(f64, f64) -> f64) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let plan = BroadcastPlan::resolve(name, va.shape(), vb.shape())?;
        let out_shape = plan.out_shape.clone();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        let (da, db) = (va.data(), vb.data());
        for i in 0..data.capacity() {
            data.push(f(da[plan.index_a(i)], db[plan.index_b(i)]));
        }
        let value = Tensor::new(out_shape, data).expect("binary shape");
        let kind = match name {
            "add" => OpKind::Add,
            "sub" => OpKind::Sub,
            _ => OpKind::Mul,
        };
        Ok(self.push_op(kind, vec![a, b], value))
    }

    /// Matrix product. Accepts `(m,k)x(k,n)`, `(m,k)x(k)`, and `(k)x(k,n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape().to_vec(), vb.shape().to_vec());
        let value = match (sa.len(), sb.len()) {
            (2, 2) if sa[1] == sb[0] => {
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut out = vec![0.0; m * n];
                matmul_into(va.data(), vb.data(), &mut out, m, k, n);
                Tensor::new(vec![m, n], out).unwrap()
            }
            (2, 1) if sa[1] == sb[0] => {
                let (m, k) = (sa[0], sa[1]);
                let mut out = vec![0.0; m];
                matmul_into(va.data(), vb.data(), &mut out, m, k, 1);
                Tensor::vector(out)
            }
            (1, 2) if sa[0] == sb[0] => {
                let (k, n) = (sb[0], sb[1]);
                let mut out = vec![0.0; n];
                matmul_into(va.data(), vb.data(), &mut out, 1, k, n);
                Tensor::vector(out)
            }
            _ => {
                return Err(Error::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
            }
        };
        Ok(self.push_op(OpKind::Matmul, vec![a, b], value))
    }

    /// Concatenate 1-D tensors (scalars count as length-1 vectors).
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty { what: "concat inputs" });
        }
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.shape().len() > 1 {
                return Err(Error::BadShape {
                    op: "concat",
                    shape: v.shape().to_vec(),
                    detail: "only rank-1 inputs can be concatenated".into(),
                });
            }
            data.extend_from_slice(v.data());
        }
        let value = Tensor::vector(data);
        Ok(self.push_op(OpKind::Concat, parts.to_vec(), value))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let value = self.map_unary(x, f64::tanh);
        Ok(self.push_op(OpKind::Tanh, vec![x], value))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.map_unary(x, sigmoid);
        Ok(self.push_op(OpKind::Sigmoid, vec![x], value))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let value = self.map_unary(x, f64::exp);
        Ok(self.push_op(OpKind::Exp, vec![x], value))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|v| **v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("input {bad} is not strictly positive"),
            });
        }
        let value = self.map_unary(x, f64::ln);
        Ok(self.push_op(OpKind::Log, vec![x], value))
    }

    /// Numerically stable softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let shape = v.shape().to_vec();
        let cols = *shape.last().unwrap();
        let mut data = v.data().to_vec();
        for row in data.chunks_mut(cols) {
            softmax_in_place(row);
        }
        let value = Tensor::new(shape, data).unwrap();
        Ok(self.push_op(OpKind::Softmax, vec![x], value))
    }

    /// Gather rows of a vector or matrix by index, with repetition.
    pub fn gather_rows(&mut self, x: Var, ids: &[usize]) -> Result<Var> {
        let v = self.value(x);
        let n = v.shape()[0];
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "gather_rows: index {bad} out of range for {n} rows"
            )));
        }
        if ids.is_empty() {
            return Err(Error::Empty { what: "gather_rows ids" });
        }
        let value = match v.shape().len() {
            1 => Tensor::vector(ids.iter().map(|&i| v.get(i)).collect()),
            2 => {
                let c = v.cols();
                let mut data = Vec::with_capacity(ids.len() * c);
                for &i in ids {
                    data.extend_from_slice(v.row(i));
                }
                Tensor::new(vec![ids.len(), c], data).unwrap()
            }
            _ => {
                return Err(Error::BadShape {
                    op: "gather_rows",
                    shape: v.shape().to_vec(),
                    detail: "rank must be 1 or 2".into(),
                })
            }
        };
        Ok(self.push_op(OpKind::GatherRows(ids.to_vec()), vec![x], value))
    }

    /// Multiply by a caller-supplied dropout mask (entries typically 0 or
    /// `1/(1-rate)`); the mask is treated as a constant.
    pub fn dropout_with_mask(&mut self, x: Var, mask: &Tensor) -> Result<Var> {
        let v = self.value(x);
        if v.shape() != mask.shape() {
            return Err(Error::ShapeMismatch {
                op: "dropout_with_mask",
                lhs: v.shape().to_vec(),
                rhs: mask.shape().to_vec(),
            });
        }
        let data = v
            .data()
            .iter()
            .zip(mask.data())
            .map(|(a, m)| a * m)
            .collect();
        let value = Tensor::new(v.shape().to_vec(), data).unwrap();
        Ok(self.push_op(OpKind::DropoutMask(mask.clone()), vec![x], value))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        Ok(self.push_op(OpKind::Sum, vec![x], value))
    }

    /// Mean of all elements, as a `[1]` tensor.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let value = Tensor::scalar(v.data().iter().sum::<f64>() / v.numel() as f64);
        Ok(self.push_op(OpKind::Mean, vec![x], value))
    }

    /// Metadata-only reshape; element count must be preserved.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.numel() {
            return Err(Error::BadShape {
                op: "reshape",
                shape: shape.to_vec(),
                detail: format!("cannot reshape {:?} ({} elements)", v.shape(), v.numel()),
            });
        }
        let value = Tensor::new(shape.to_vec(), v.data().to_vec()).unwrap();
        Ok(self.push_op(OpKind::Reshape, vec![x], value))
    }

    fn map_unary(&self, x: Var, f: fn(f64) -> f64) -> Tensor {
        let v = self.value(x);
        Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| f(a)).collect()).unwrap()
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root. Every recorded op is visited exactly
    /// once; leaves unreachable from the root keep a `None` gradient (read as
    /// zero via [`Tape::grad_or_zero`]).
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(Error::BadShape {
                op: "backward",
                shape: self.value(root).shape().to_vec(),
                detail: "root must be scalar".into(),
            });
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root.0] = Some(vec![1.0]);

        let ops = std::mem::take(&mut self.ops);
        for op in ops.iter().rev() {
            // Take (not clone): once the producing op is processed, nothing
            // downstream reads this accumulator again.
            let Some(dout) = self.grads[op.output.0].take() else {
                continue;
            };
            self.backward_op(op, &dout);
        }
        self.ops = ops;
        // Drop intermediates; only leaf gradients remain visible.
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.is_leaf || !node.requires_grad {
                self.grads[i] = None;
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: &[f64]) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => self.grads[v.0] = Some(delta.to_vec()),
        }
    }

    fn backward_op(&mut self, op: &OpRecord, dout: &[f64]) {
        match &op.kind {
            OpKind::Add | OpKind::Sub => {
                let (a, b) = (op.inputs[0], op.inputs[1]);
                let plan = BroadcastPlan::resolve(
                    "add",
                    self.value(a).shape(),
                    self.value(b).shape(),
                )
                .expect("recorded op reshapes");
                let da = plan.reduce_to_a(dout);
                self.accumulate(a, &da);
                let mut db = plan.reduce_to_b(dout);
                if matches!(op.kind, OpKind::Sub) {
                    for x in db.iter_mut() {
                        *x = -*x;
                    }
                }
                self.accumulate(b, &db);
            }
            OpKind::Mul => {
                let (a, b) = (op.inputs[0], op.inputs[1]);
                let plan = BroadcastPlan::resolve(
                    "mul",
                    self.value(a).shape(),
                    self.value(b).shape(),
                )
                .expect("recorded op reshapes");
                let (da_full, db_full): (Vec<f64>, Vec<f64>) = {
                    let (va, vb) = (self.value(a).data(), self.value(b).data());
                    let da = dout
                        .iter()
                        .enumerate()
                        .map(|(i, d)| d * vb[plan.index_b(i)])
                        .collect();
                    let db = dout
                        .iter()
                        .enumerate()
                        .map(|(i, d)| d * va[plan.index_a(i)])
                        .collect();
                    (da, db)
                };
                let da = plan.reduce_full_to_a(&da_full);
                let db = plan.reduce_full_to_b(&db_full);
                self.accumulate(a, &da);
                self.accumulate(b, &db);
            }
            OpKind::Matmul => {
                let (a, b) = (op.inputs[0], op.inputs[1]);
                let (sa, sb) = (
                    self.value(a).shape().to_vec(),
                    self.value(b).shape().to_vec(),
                );
                let (m, k, n) = match (sa.len(), sb.len()) {
                    (2, 2) => (sa[0], sa[1], sb[1]),
                    (2, 1) => (sa[0], sa[1], 1),
                    (1, 2) => (1, sb[0], sb[1]),
                    _ => unreachable!(),
                };
                // dA = dC B^T ; dB = A^T dC, with the recorded 1-D cases
                // treated as degenerate matrices.
                let (da, db): (Vec<f64>, Vec<f64>) = {
                    let (va, vb) = (self.value(a).data(), self.value(b).data());
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let d = dout[i * n + j];
                            if d != 0.0 {
                                for t in 0..k {
                                    da[i * k + t] += d * vb[t * n + j];
                                }
                            }
                        }
                    }
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for t in 0..k {
                            let av = va[i * k + t];
                            if av != 0.0 {
                                for j in 0..n {
                                    db[t * n + j] += av * dout[i * n + j];
                                }
                            }
                        }
                    }
                    (da, db)
                };
                self.accumulate(a, &da);
                self.accumulate(b, &db);
            }
            OpKind::Concat => {
                let mut offset = 0;
                for &p in &op.inputs {
                    let len = self.value(p).numel();
                    let slice = dout[offset..offset + len].to_vec();
                    self.accumulate(p, &slice);
                    offset += len;
                }
            }
            OpKind::Tanh => {
                let y = self.value(op.output).data();
                let dx: Vec<f64> = dout
                    .iter()
                    .zip(y)
                    .map(|(d, y)| d * (1.0 - y * y))
                    .collect();
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Sigmoid => {
                let y = self.value(op.output).data();
                let dx: Vec<f64> = dout.iter().zip(y).map(|(d, y)| d * y * (1.0 - y)).collect();
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Exp => {
                let y = self.value(op.output).data();
                let dx: Vec<f64> = dout.iter().zip(y).map(|(d, y)| d * y).collect();
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Log => {
                let x = self.value(op.inputs[0]).data();
                let dx: Vec<f64> = dout.iter().zip(x).map(|(d, x)| d / x).collect();
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Softmax => {
                let y = self.value(op.output).data();
                let cols = *self.value(op.output).shape().last().unwrap();
                let mut dx = vec![0.0; y.len()];
                for (r, (yr, dr)) in y.chunks(cols).zip(dout.chunks(cols)).enumerate() {
                    let inner: f64 = yr.iter().zip(dr).map(|(y, d)| y * d).sum();
                    for j in 0..cols {
                        dx[r * cols + j] = yr[j] * (dr[j] - inner);
                    }
                }
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::GatherRows(ids) => {
                let src = self.value(op.inputs[0]);
                let cols = if src.shape().len() == 2 { src.cols() } else { 1 };
                let mut dx = vec![0.0; src.numel()];
                for (slot, &row) in ids.iter().enumerate() {
                    for j in 0..cols {
                        dx[row * cols + j] += dout[slot * cols + j];
                    }
                }
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::DropoutMask(mask) => {
                let dx: Vec<f64> = dout.iter().zip(mask.data()).map(|(d, m)| d * m).collect();
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Sum => {
                let n = self.value(op.inputs[0]).numel();
                let dx = vec![dout[0]; n];
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Mean => {
                let n = self.value(op.inputs[0]).numel();
                let dx = vec![dout[0] / n as f64; n];
                self.accumulate(op.inputs[0], &dx);
            }
            OpKind::Reshape => {
                self.accumulate(op.inputs[0], dout);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    for x in row.iter_mut() {
        *x /= z;
    }
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (t, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let brow = &b[t * n..(t + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
}

/// Shape resolution for the elementwise binary ops.
struct BroadcastPlan {
    out_shape: Vec<usize>,
    a_kind: SideKind,
    b_kind: SideKind,
    cols: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum SideKind {
    Full,
    Scalar,
    Row,
}

impl BroadcastPlan {
    fn resolve(op: &'static str, a: &[usize], b: &[usize]) -> Result<Self> {
        let numel = |s: &[usize]| s.iter().product::<usize>();
        let (na, nb) = (numel(a), numel(b));
        let (out_shape, a_kind, b_kind) = if a == b {
            (a.to_vec(), SideKind::Full, SideKind::Full)
        } else if nb == 1 {
            (a.to_vec(), SideKind::Full, SideKind::Scalar)
        } else if na == 1 {
            (b.to_vec(), SideKind::Scalar, SideKind::Full)
        } else if b.len() == 1 && a.len() == 2 && a[1] == b[0] {
            (a.to_vec(), SideKind::Full, SideKind::Row)
        } else if a.len() == 1 && b.len() == 2 && b[1] == a[0] {
            (b.to_vec(), SideKind::Row, SideKind::Full)
        } else {
            return Err(Error::ShapeMismatch { op, lhs: a.to_vec(), rhs: b.to_vec() });
        };
        let cols = *out_shape.last().unwrap_or(&1);
        Ok(BroadcastPlan { out_shape, a_kind, b_kind, cols })
    }

    fn index_side(&self, kind: SideKind, i: usize) -> usize {
        match kind {
            SideKind::Full => i,
            SideKind::Scalar => 0,
            SideKind::Row => i % self.cols,
        }
    }

    fn index_a(&self, i: usize) -> usize {
        self.index_side(self.a_kind, i)
    }

    fn index_b(&self, i: usize) -> usize {
        self.index_side(self.b_kind, i)
    }

    fn reduce_side(&self, kind: SideKind, dout: &[f64]) -> Vec<f64> {
        match kind {
            SideKind::Full => dout.to_vec(),
            SideKind::Scalar => vec![dout.iter().sum()],
            SideKind::Row => {
                let mut acc = vec![0.0; self.cols];
                for chunk in dout.chunks(self.cols) {
                    for (a, d) in acc.iter_mut().zip(chunk) {
                        *a += d;
                    }
                }
                acc
            }
        }
    }

    fn reduce_to_a(&self, dout: &[f64]) -> Vec<f64> {
        self.reduce_side(self.a_kind, dout)
    }

    fn reduce_to_b(&self, dout: &[f64]) -> Vec<f64> {
        self.reduce_side(self.b_kind, dout)
    }

    /// Like `reduce_to_a`, for gradients already multiplied elementwise.
    fn reduce_full_to_a(&self, d_full: &[f64]) -> Vec<f64> {
        self.reduce_side(self.a_kind, d_full)
    }

    fn reduce_full_to_b(&self, d_full: &[f64]) -> Vec<f64> {
        self.reduce_side(self.b_kind, d_full)
    }
}
