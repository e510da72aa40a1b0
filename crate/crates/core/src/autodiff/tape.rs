//! Wengert tape: operations are recorded during the forward pass and replayed in
//! reverse creation order, which is a topological order of the graph.

use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    Offset(Var),
    Square(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LogSumExp(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Sum(Var),
    Pick { src: Var, index: usize },
}

struct Node<T> {
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<'p, T> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { params, nodes: Vec::new(), param_vars: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.value(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v).item()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value: Some(value), op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn constant(&mut self, x: T) -> Var {
        self.input(Tensor::scalar(x))
    }

    /// Trainable leaf. Every use of the same parameter shares one node, so gradients
    /// from all consumers are summed.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let needs_grad = !self.params.is_frozen(id);
        self.nodes.push(Node { value: None, op: Op::Param(id), needs_grad });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Embedding lookup: row `row` of parameter `id` as a `1 × d` vector.
    pub fn embed(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let table = self.params.value(id);
        if row >= table.rows() {
            return Err(Error::IdOutOfRange {
                kind: "embedding row",
                id: row,
                size: table.rows(),
            });
        }
        let value = Tensor::row(table.row_slice(row).to_vec());
        let needs_grad = !self.params.is_frozen(id);
        Ok(self.push(value, Op::Row { param: id, row }, needs_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::MatMul(a, b), ng)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "elementwise operands differ in shape");
        let value = va.zip_map(vb, f);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(a).map(f);
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.unary(a, Op::Scale(a, s), |x| x * s)
    }

    /// `a + c` for a constant scalar `c`.
    pub fn offset(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::Offset(a), |x| x + c)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), Real::sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), |x| x.ln())
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), Real::softplus)
    }

    fn rowwise(&mut self, a: Var, op: Op<T>, f: impl Fn(&[T], &mut Vec<T>)) -> Var {
        let va = self.value(a);
        let out_cols = if matches!(op, Op::LogSumExp(_)) { 1 } else { va.cols() };
        let mut data = Vec::with_capacity(va.rows() * out_cols);
        for r in 0..va.rows() {
            f(va.row_slice(r), &mut data);
        }
        let value = Tensor::from_vec(va.rows(), out_cols, data);
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        self.rowwise(a, Op::Softmax(a), |row, out| {
            let lse = crate::scalar::log_sum_exp(row);
            out.extend(row.iter().map(|&x| (x - lse).exp()));
        })
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        self.rowwise(a, Op::LogSoftmax(a), |row, out| {
            let lse = crate::scalar::log_sum_exp(row);
            out.extend(row.iter().map(|&x| x - lse));
        })
    }

    /// Row-wise log-sum-exp, `m × 1`.
    pub fn log_sum_exp(&mut self, a: Var) -> Var {
        self.rowwise(a, Op::LogSumExp(a), |row, out| out.push(crate::scalar::log_sum_exp(row)))
    }

    /// Column-wise concatenation of same-height operands.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let v = self.value(p);
                assert_eq!(v.rows(), rows, "concat operands differ in height");
                data.extend_from_slice(v.row_slice(r));
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(Tensor::from_vec(rows, cols, data), Op::Concat(parts.to_vec()), ng)
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let va = self.value(a);
        assert!(start <= end && end <= va.cols(), "column slice out of range");
        let mut data = Vec::with_capacity(va.rows() * (end - start));
        for r in 0..va.rows() {
            data.extend_from_slice(&va.row_slice(r)[start..end]);
        }
        let value = Tensor::from_vec(va.rows(), end - start, data);
        let ng = self.ng(a);
        self.push(value, Op::Slice { src: a, start }, ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Sum(a), ng)
    }

    /// Element at flat (row-major) `index` as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Var {
        let x = self.value(a).data()[index];
        let ng = self.ng(a);
        self.push(Tensor::scalar(x), Op::Pick { src: a, index }, ng)
    }

    /// `x W + b` for a row `x`.
    pub fn affine(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let xw = self.matmul(x, w);
        self.add(xw, b)
    }

    /// Reverse pass from a scalar root. Gradients of trainable leaves are added
    /// into `grads`; frozen leaves are skipped.
    pub fn backward(&self, root: Var, grads: &mut Gradients<T>) -> Result<()> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be a scalar, got shape {:?}",
                rv.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor<T>>> = Vec::with_capacity(root.0 + 1);
        adj.resize_with(root.0 + 1, || None);
        adj[root.0] = Some(Tensor::scalar(T::one()));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj, grads);
        }
        Ok(())
    }

    fn accum(&self, adj: &mut [Option<Tensor<T>>], v: Var, f: impl FnOnce(&mut Tensor<T>)) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let slot = &mut adj[v.0];
        if slot.is_none() {
            let (r, c) = self.value(v).shape();
            *slot = Some(Tensor::zeros(r, c));
        }
        f(slot.as_mut().unwrap());
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, adj: &mut [Option<Tensor<T>>], grads: &mut Gradients<T>) {
        let node = &self.nodes[i];
        let out = node.value.as_ref();
        let one = T::one();
        match &node.op {
            Op::Input => {}
            Op::Param(id) => grads.get_mut(*id).add_assign(g),
            Op::Row { param, row } => {
                let dst = grads.get_mut(*param).row_slice_mut(*row);
                for (d, &x) in dst.iter_mut().zip(g.data()) {
                    *d += x;
                }
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.accum(adj, *a, |da| g.matmul_nt_into(vb, da));
                self.accum(adj, *b, |db| va.matmul_tn_into(g, db));
            }
            Op::Add(a, b) => {
                self.accum(adj, *a, |da| da.add_assign(g));
                self.accum(adj, *b, |db| db.add_assign(g));
            }
            Op::Sub(a, b) => {
                self.accum(adj, *a, |da| da.add_assign(g));
                self.accum(adj, *b, |db| zip_acc(db, g, None, |gx, _| -gx));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.accum(adj, *a, |da| zip_acc(da, g, Some(vb), |gx, y| gx * y));
                self.accum(adj, *b, |db| zip_acc(db, g, Some(va), |gx, x| gx * x));
            }
            Op::Div(a, b) => {
                let vb = self.value(*b);
                self.accum(adj, *a, |da| zip_acc(da, g, Some(vb), |gx, y| gx / y));
                let q = out.unwrap();
                self.accum(adj, *b, |db| {
                    for ((d, &gx), (&qv, &y)) in
                        db.data_mut().iter_mut().zip(g.data()).zip(q.data().iter().zip(vb.data()))
                    {
                        *d -= gx * qv / y;
                    }
                });
            }
            Op::Scale(a, s) => self.accum(adj, *a, |da| zip_acc(da, g, None, |gx, _| gx * *s)),
            Op::Offset(a) => self.accum(adj, *a, |da| da.add_assign(g)),
            Op::Square(a) => {
                let va = self.value(*a);
                self.accum(adj, *a, |da| zip_acc(da, g, Some(va), |gx, x| gx * (x + x)));
            }
            Op::Tanh(a) => {
                let y = out.unwrap();
                self.accum(adj, *a, |da| zip_acc(da, g, Some(y), |gx, t| gx * (one - t * t)));
            }
            Op::Sigmoid(a) => {
                let y = out.unwrap();
                self.accum(adj, *a, |da| zip_acc(da, g, Some(y), |gx, s| gx * s * (one - s)));
            }
            Op::Exp(a) => {
                let y = out.unwrap();
                self.accum(adj, *a, |da| zip_acc(da, g, Some(y), |gx, e| gx * e));
            }
            Op::Log(a) => {
                let va = self.value(*a);
                self.accum(adj, *a, |da| zip_acc(da, g, Some(va), |gx, x| gx / x));
            }
            Op::Softplus(a) => {
                let va = self.value(*a);
                self.accum(adj, *a, |da| zip_acc(da, g, Some(va), |gx, x| gx * x.sigmoid()));
            }
            Op::Softmax(a) => {
                let y = out.unwrap();
                self.accum(adj, *a, |da| {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for ((d, &p), &q) in da.row_slice_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d += p * (q - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let y = out.unwrap();
                self.accum(adj, *a, |da| {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let gsum: T = gr.iter().copied().sum();
                        for ((d, &ls), &q) in da.row_slice_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d += q - ls.exp() * gsum;
                        }
                    }
                });
            }
            Op::LogSumExp(a) => {
                let va = self.value(*a);
                let y = out.unwrap();
                self.accum(adj, *a, |da| {
                    for r in 0..va.rows() {
                        let (lse, gr) = (y.get(r, 0), g.get(r, 0));
                        for (d, &x) in da.row_slice_mut(r).iter_mut().zip(va.row_slice(r)) {
                            *d += gr * (x - lse).exp();
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    self.accum(adj, p, |dp| {
                        for r in 0..g.rows() {
                            let src = &g.row_slice(r)[offset..offset + w];
                            for (d, &x) in dp.row_slice_mut(r).iter_mut().zip(src) {
                                *d += x;
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Slice { src, start } => {
                let w = g.cols();
                self.accum(adj, *src, |ds| {
                    for r in 0..g.rows() {
                        let dst = &mut ds.row_slice_mut(r)[*start..*start + w];
                        for (d, &x) in dst.iter_mut().zip(g.row_slice(r)) {
                            *d += x;
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let gx = g.item();
                self.accum(adj, *a, |da| da.data_mut().iter_mut().for_each(|d| *d += gx));
            }
            Op::Pick { src, index } => {
                let gx = g.item();
                self.accum(adj, *src, |ds| ds.data_mut()[*index] += gx);
            }
        }
    }
}

#[inline]
fn zip_acc<T: Real>(dst: &mut Tensor<T>, g: &Tensor<T>, other: Option<&Tensor<T>>, f: impl Fn(T, T) -> T) {
    match other {
        Some(o) => {
            for ((d, &gx), &y) in dst.data_mut().iter_mut().zip(g.data()).zip(o.data()) {
                *d += f(gx, y);
            }
        }
        None => {
            for (d, &gx) in dst.data_mut().iter_mut().zip(g.data()) {
                *d += f(gx, T::zero());
            }
        }
    }
}
