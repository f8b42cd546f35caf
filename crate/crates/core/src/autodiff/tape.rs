//! Define-by-run reverse-mode tape.
//!
//! Every operation evaluates eagerly and appends a node; inputs always
//! precede outputs, so one reverse sweep over the node list is a valid
//! topological order. A tape is meant to be built for a single forward pass
//! and dropped after [`Tape::backward`].

use std::cell::RefCell;
use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::{mm, mm_nt, mm_tn, transpose, Tensor};
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<S> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Concat(Vec<Var>),
    Add(Var, Var),
    Sub(Var, Var),
    AddRowBias(Var, Var),
    Scale(Var, S),
    Sigmoid(Var),
    Relu(Var),
    Sum(Var),
    Mean(Var),
    Bce { logit: Var, labels: Vec<S> },
    FrobeniusSq(Var),
    GatherRows { table: Var, indices: Vec<usize> },
    GatherMean { table: Var, offsets: Vec<usize>, indices: Vec<usize> },
    SoftmaxRows(Var),
    SelectCol(Var, usize),
    MulRows(Var, Var),
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

pub struct Tape<S> {
    nodes: RefCell<Vec<Node<S>>>,
    param_vars: RefCell<HashMap<ParamId, Var>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn dim_err(op: &'static str, a: &Tensor<impl Scalar>, b: &Tensor<impl Scalar>) -> Error {
    Error::Dimension {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            param_vars: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].needs_grad
    }

    /// Clone of a node's current value.
    pub fn value(&self, v: Var) -> Tensor<S> {
        self.nodes.borrow()[v.0].value.clone()
    }

    /// Runs `f` on a borrowed node value.
    pub fn with_value<R>(&self, v: Var, f: impl FnOnce(&Tensor<S>) -> R) -> R {
        f(&self.nodes.borrow()[v.0].value)
    }

    pub fn scalar_value(&self, v: Var) -> S {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn leaf(&self, value: Tensor<S>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&self, value: Tensor<S>) -> Var {
        self.leaf(value, false)
    }

    /// Places a parameter on the tape. Repeated calls return the same node,
    /// so a parameter used in several places accumulates a single gradient.
    pub fn param(&self, store: &ParamStore<S>, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.borrow().get(&id) {
            return v;
        }
        let p = store.get(id);
        let v = self.push(p.value.clone(), Op::Param(id), p.trainable);
        self.param_vars.borrow_mut().insert(id, v);
        v
    }

    fn unary(&self, x: Var, f: impl FnOnce(&Tensor<S>) -> Result<Tensor<S>>, op: Op<S>) -> Result<Var> {
        let (out, ng) = {
            let nodes = self.nodes.borrow();
            (f(&nodes[x.0].value)?, nodes[x.0].needs_grad)
        };
        Ok(self.push(out, op, ng))
    }

    fn binary(
        &self,
        a: Var,
        b: Var,
        f: impl FnOnce(&Tensor<S>, &Tensor<S>) -> Result<Tensor<S>>,
        op: Op<S>,
    ) -> Result<Var> {
        let (out, ng) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            (f(&na.value, &nb.value)?, na.needs_grad || nb.needs_grad)
        };
        Ok(self.push(out, op, ng))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(
            a,
            b,
            |x, y| {
                let (m, k) = x.dims2("matmul")?;
                let (k2, n) = y.dims2("matmul")?;
                if k != k2 {
                    return Err(dim_err("matmul", x, y));
                }
                Tensor::matrix(m, n, mm(x.data(), y.data(), m, k, n))
            },
            Op::MatMul(a, b),
        )
    }

    pub fn transpose(&self, x: Var) -> Result<Var> {
        self.unary(x, |t| t.transposed(), Op::Transpose(x))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of zero tensors".into()));
        }
        let (out, ng) = {
            let nodes = self.nodes.borrow();
            let first = &nodes[parts[0].0].value;
            let (m, _) = first.dims2("concat")?;
            let mut widths = Vec::with_capacity(parts.len());
            for p in parts {
                let t = &nodes[p.0].value;
                let (r, c) = t.dims2("concat")?;
                if r != m {
                    return Err(dim_err("concat", first, t));
                }
                widths.push(c);
            }
            let total: usize = widths.iter().sum();
            let mut data = Vec::with_capacity(m * total);
            for i in 0..m {
                for (p, &w) in parts.iter().zip(&widths) {
                    data.extend_from_slice(&nodes[p.0].value.data()[i * w..(i + 1) * w]);
                }
            }
            let ng = parts.iter().any(|p| nodes[p.0].needs_grad);
            (Tensor::matrix(m, total, data)?, ng)
        };
        Ok(self.push(out, Op::Concat(parts.to_vec()), ng))
    }

    pub fn concat2(&self, a: Var, b: Var) -> Result<Var> {
        self.concat(&[a, b])
    }

    fn zip_same(op: &'static str, x: &Tensor<S>, y: &Tensor<S>, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        if x.shape() != y.shape() {
            return Err(dim_err(op, x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(&a, &b)| f(a, b)).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| Self::zip_same("add", x, y, |p, q| p + q), Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| Self::zip_same("sub", x, y, |p, q| p - q), Op::Sub(a, b))
    }

    /// `x[m×n] + bias` where the bias holds `n` values, added to every row.
    pub fn add_row_bias(&self, x: Var, bias: Var) -> Result<Var> {
        self.binary(
            x,
            bias,
            |t, b| {
                let (m, n) = t.dims2("add_row_bias")?;
                if b.numel() != n {
                    return Err(dim_err("add_row_bias", t, b));
                }
                let mut data = t.data().to_vec();
                for i in 0..m {
                    for (v, &bv) in data[i * n..(i + 1) * n].iter_mut().zip(b.data()) {
                        *v = *v + bv;
                    }
                }
                Tensor::matrix(m, n, data)
            },
            Op::AddRowBias(x, bias),
        )
    }

    pub fn scale(&self, x: Var, c: S) -> Result<Var> {
        self.unary(
            x,
            |t| Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| v * c).collect()),
            Op::Scale(x, c),
        )
    }

    pub fn sigmoid(&self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |t| Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| scalar::sigmoid(v)).collect()),
            Op::Sigmoid(x),
        )
    }

    pub fn relu(&self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |t| {
                Tensor::new(
                    t.shape().to_vec(),
                    t.data().iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect(),
                )
            },
            Op::Relu(x),
        )
    }

    pub fn sum(&self, x: Var) -> Result<Var> {
        self.unary(x, |t| Ok(Tensor::scalar(t.data().iter().copied().sum())), Op::Sum(x))
    }

    pub fn mean(&self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |t| {
                if t.numel() == 0 {
                    return Err(Error::Contract("mean of empty tensor".into()));
                }
                let s: S = t.data().iter().copied().sum();
                Ok(Tensor::scalar(s / S::lit(t.numel() as f64)))
            },
            Op::Mean(x),
        )
    }

    /// Mean binary cross-entropy of `σ(logit)` against 0/1 labels, evaluated
    /// as `y·softplus(-ℓ) + (1-y)·softplus(ℓ)` so it never overflows.
    pub fn bce_with_logits(&self, logit: Var, labels: &[S]) -> Result<Var> {
        if let Some(bad) = labels.iter().find(|&&y| y != S::zero() && y != S::one()) {
            return Err(Error::Validation(format!("label {bad} is not 0 or 1")));
        }
        let labels = labels.to_vec();
        let (out, ng) = {
            let nodes = self.nodes.borrow();
            let l = &nodes[logit.0];
            if l.value.numel() != labels.len() || labels.is_empty() {
                return Err(Error::Dimension {
                    op: "bce_with_logits",
                    lhs: l.value.shape().to_vec(),
                    rhs: vec![labels.len()],
                });
            }
            let s: S = l
                .value
                .data()
                .iter()
                .zip(&labels)
                .map(|(&x, &y)| {
                    if y == S::one() {
                        scalar::softplus(-x)
                    } else {
                        scalar::softplus(x)
                    }
                })
                .sum();
            (Tensor::scalar(s / S::lit(labels.len() as f64)), l.needs_grad)
        };
        Ok(self.push(out, Op::Bce { logit, labels }, ng))
    }

    pub fn frobenius_sq(&self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |t| Ok(Tensor::scalar(t.data().iter().map(|&v| v * v).sum())),
            Op::FrobeniusSq(x),
        )
    }

    /// Stacks rows of `table[V×d]`; `field` names the lookup in errors.
    pub fn gather_rows(&self, table: Var, indices: &[usize], field: &str) -> Result<Var> {
        let (out, ng) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[table.0];
            let (v, d) = t.value.dims2("gather_rows")?;
            let mut data = Vec::with_capacity(indices.len() * d);
            for &i in indices {
                if i >= v {
                    return Err(Error::IndexOutOfRange {
                        field: field.to_string(),
                        index: i,
                        vocab: v,
                    });
                }
                data.extend_from_slice(t.value.row(i));
            }
            (Tensor::matrix(indices.len(), d, data)?, t.needs_grad)
        };
        Ok(self.push(
            out,
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
            ng,
        ))
    }

    /// Row `r` of the output is the mean of the table rows listed in
    /// `indices[offsets[r]..offsets[r + 1]]` (multi-hot mean pooling).
    pub fn gather_mean(&self, table: Var, offsets: &[usize], indices: &[usize], field: &str) -> Result<Var> {
        if offsets.is_empty() || *offsets.last().unwrap() != indices.len() || offsets[0] != 0 {
            return Err(Error::Contract("gather_mean offsets do not cover indices".into()));
        }
        let (out, ng) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[table.0];
            let (v, d) = t.value.dims2("gather_mean")?;
            let rows = offsets.len() - 1;
            let mut data = vec![S::zero(); rows * d];
            for r in 0..rows {
                let set = &indices[offsets[r]..offsets[r + 1]];
                if set.is_empty() {
                    return Err(Error::Validation(format!("empty multi-hot set in field `{field}`")));
                }
                let inv = S::one() / S::lit(set.len() as f64);
                let out = &mut data[r * d..(r + 1) * d];
                for &i in set {
                    if i >= v {
                        return Err(Error::IndexOutOfRange {
                            field: field.to_string(),
                            index: i,
                            vocab: v,
                        });
                    }
                    for (o, &x) in out.iter_mut().zip(t.value.row(i)) {
                        *o = *o + x;
                    }
                }
                for o in out.iter_mut() {
                    *o = *o * inv;
                }
            }
            (Tensor::matrix(rows, d, data)?, t.needs_grad)
        };
        Ok(self.push(
            out,
            Op::GatherMean {
                table,
                offsets: offsets.to_vec(),
                indices: indices.to_vec(),
            },
            ng,
        ))
    }

    pub fn softmax_rows(&self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |t| {
                let (m, n) = t.dims2("softmax_rows")?;
                let mut data = t.data().to_vec();
                for i in 0..m {
                    let row = &mut data[i * n..(i + 1) * n];
                    let mx = row.iter().copied().fold(S::neg_infinity(), S::max);
                    let mut z = S::zero();
                    for v in row.iter_mut() {
                        *v = (*v - mx).exp();
                        z = z + *v;
                    }
                    for v in row.iter_mut() {
                        *v = *v / z;
                    }
                }
                Tensor::matrix(m, n, data)
            },
            Op::SoftmaxRows(x),
        )
    }

    /// Column `j` as an `m×1` matrix.
    pub fn select_col(&self, x: Var, j: usize) -> Result<Var> {
        self.unary(
            x,
            |t| {
                let (m, n) = t.dims2("select_col")?;
                if j >= n {
                    return Err(Error::Dimension {
                        op: "select_col",
                        lhs: t.shape().to_vec(),
                        rhs: vec![j],
                    });
                }
                Tensor::matrix(m, 1, (0..m).map(|i| t.get(i, j)).collect())
            },
            Op::SelectCol(x, j),
        )
    }

    /// Scales row `i` of `x[m×n]` by `s[i]`, with `s` an `m×1` matrix.
    pub fn mul_rows(&self, x: Var, s: Var) -> Result<Var> {
        self.binary(
            x,
            s,
            |t, w| {
                let (m, n) = t.dims2("mul_rows")?;
                if w.numel() != m {
                    return Err(dim_err("mul_rows", t, w));
                }
                let mut data = t.data().to_vec();
                for i in 0..m {
                    let c = w.data()[i];
                    for v in &mut data[i * n..(i + 1) * n] {
                        *v = *v * c;
                    }
                }
                Tensor::matrix(m, n, data)
            },
            Op::MulRows(x, s),
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        let nodes = self.nodes.borrow();
        if !nodes[loss.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::one()]);

        fn acc<S: Scalar>(grads: &mut [Option<Vec<S>>], nodes: &[Node<S>], v: Var, g: Vec<S>) {
            if !nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(buf) => {
                    for (a, b) in buf.iter_mut().zip(g) {
                        *a = *a + b;
                    }
                }
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.needs_grad {
                continue;
            }
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf | Op::Param(_) => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (m, k) = val(*a).dims2("matmul")?;
                    let (_, n) = val(*b).dims2("matmul")?;
                    if nodes[a.0].needs_grad {
                        let ga = mm_nt(&g, val(*b).data(), m, n, k);
                        acc(&mut grads, &nodes, *a, ga);
                    }
                    if nodes[b.0].needs_grad {
                        let gb = mm_tn(val(*a).data(), &g, m, k, n);
                        acc(&mut grads, &nodes, *b, gb);
                    }
                }
                Op::Transpose(x) => {
                    let (r, c) = val(*x).dims2("transpose")?;
                    acc(&mut grads, &nodes, *x, transpose(&g, c, r));
                }
                Op::Concat(parts) => {
                    let (m, total) = node.value.dims2("concat")?;
                    let mut off = 0;
                    for p in parts {
                        let (_, w) = val(*p).dims2("concat")?;
                        if nodes[p.0].needs_grad {
                            let mut gp = Vec::with_capacity(m * w);
                            for r in 0..m {
                                gp.extend_from_slice(&g[r * total + off..r * total + off + w]);
                            }
                            acc(&mut grads, &nodes, *p, gp);
                        }
                        off += w;
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, &nodes, *a, g.clone());
                    acc(&mut grads, &nodes, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, &nodes, *a, g.clone());
                    acc(&mut grads, &nodes, *b, g.into_iter().map(|v| -v).collect());
                }
                Op::AddRowBias(x, b) => {
                    let (m, n) = node.value.dims2("add_row_bias")?;
                    if nodes[b.0].needs_grad {
                        let mut gb = vec![S::zero(); n];
                        for r in 0..m {
                            for (o, &v) in gb.iter_mut().zip(&g[r * n..(r + 1) * n]) {
                                *o = *o + v;
                            }
                        }
                        acc(&mut grads, &nodes, *b, gb);
                    }
                    acc(&mut grads, &nodes, *x, g);
                }
                Op::Scale(x, c) => {
                    acc(&mut grads, &nodes, *x, g.into_iter().map(|v| v * *c).collect());
                }
                Op::Sigmoid(x) => {
                    let gx = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(&gv, &y)| gv * y * (S::one() - y))
                        .collect();
                    acc(&mut grads, &nodes, *x, gx);
                }
                Op::Relu(x) => {
                    let gx = g
                        .iter()
                        .zip(val(*x).data())
                        .map(|(&gv, &xv)| if xv > S::zero() { gv } else { S::zero() })
                        .collect();
                    acc(&mut grads, &nodes, *x, gx);
                }
                Op::Sum(x) => {
                    acc(&mut grads, &nodes, *x, vec![g[0]; val(*x).numel()]);
                }
                Op::Mean(x) => {
                    let n = val(*x).numel();
                    acc(&mut grads, &nodes, *x, vec![g[0] / S::lit(n as f64); n]);
                }
                Op::Bce { logit, labels } => {
                    let inv = g[0] / S::lit(labels.len() as f64);
                    let gx = val(*logit)
                        .data()
                        .iter()
                        .zip(labels)
                        .map(|(&l, &y)| (scalar::sigmoid(l) - y) * inv)
                        .collect();
                    acc(&mut grads, &nodes, *logit, gx);
                }
                Op::FrobeniusSq(x) => {
                    let two = S::lit(2.0) * g[0];
                    acc(&mut grads, &nodes, *x, val(*x).data().iter().map(|&v| two * v).collect());
                }
                Op::GatherRows { table, indices } => {
                    let (v, d) = val(*table).dims2("gather_rows")?;
                    let mut gt = vec![S::zero(); v * d];
                    for (r, &idx) in indices.iter().enumerate() {
                        for (o, &x) in gt[idx * d..(idx + 1) * d].iter_mut().zip(&g[r * d..(r + 1) * d]) {
                            *o = *o + x;
                        }
                    }
                    acc(&mut grads, &nodes, *table, gt);
                }
                Op::GatherMean { table, offsets, indices } => {
                    let (v, d) = val(*table).dims2("gather_mean")?;
                    let mut gt = vec![S::zero(); v * d];
                    for r in 0..offsets.len() - 1 {
                        let set = &indices[offsets[r]..offsets[r + 1]];
                        let inv = S::one() / S::lit(set.len() as f64);
                        for &idx in set {
                            for (o, &x) in gt[idx * d..(idx + 1) * d].iter_mut().zip(&g[r * d..(r + 1) * d]) {
                                *o = *o + x * inv;
                            }
                        }
                    }
                    acc(&mut grads, &nodes, *table, gt);
                }
                Op::SoftmaxRows(x) => {
                    let (m, n) = node.value.dims2("softmax_rows")?;
                    let y = node.value.data();
                    let mut gx = vec![S::zero(); m * n];
                    for r in 0..m {
                        let yr = &y[r * n..(r + 1) * n];
                        let gr = &g[r * n..(r + 1) * n];
                        let dot: S = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for j in 0..n {
                            gx[r * n + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    acc(&mut grads, &nodes, *x, gx);
                }
                Op::SelectCol(x, j) => {
                    let (m, n) = val(*x).dims2("select_col")?;
                    let mut gx = vec![S::zero(); m * n];
                    for r in 0..m {
                        gx[r * n + j] = g[r];
                    }
                    acc(&mut grads, &nodes, *x, gx);
                }
                Op::MulRows(x, s) => {
                    let (m, n) = val(*x).dims2("mul_rows")?;
                    let sv = val(*s).data();
                    if nodes[s.0].needs_grad {
                        let xv = val(*x).data();
                        let gs = (0..m)
                            .map(|r| {
                                xv[r * n..(r + 1) * n]
                                    .iter()
                                    .zip(&g[r * n..(r + 1) * n])
                                    .map(|(&a, &b)| a * b)
                                    .sum()
                            })
                            .collect();
                        acc(&mut grads, &nodes, *s, gs);
                    }
                    if nodes[x.0].needs_grad {
                        let mut gx = g;
                        for r in 0..m {
                            for v in &mut gx[r * n..(r + 1) * n] {
                                *v = *v * sv[r];
                            }
                        }
                        acc(&mut grads, &nodes, *x, gx);
                    }
                }
            }
        }

        let mut by_var = HashMap::new();
        let mut params = Vec::new();
        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &nodes[i];
            let t = Tensor::new(node.value.shape().to_vec(), g)?;
            match node.op {
                Op::Param(id) => params.push((id, t)),
                Op::Leaf => {
                    by_var.insert(i, t);
                }
                _ => {}
            }
        }
        Ok(Gradients { by_var, params })
    }

    /// Whether a node participates in gradient computation.
    pub fn requires_grad(&self, v: Var) -> bool {
        self.needs(v)
    }
}

/// Result of one backward pass: gradients of the loss with respect to every
/// reachable gradient-requiring leaf and parameter.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    by_var: HashMap<usize, Tensor<S>>,
    params: Vec<(ParamId, Tensor<S>)>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient for a leaf created with `requires_grad = true`.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<S>> {
        self.by_var.get(&v.0)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<S>> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, t)| t)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor<S>)> {
        self.params.iter().map(|(id, t)| (*id, t))
    }
}
