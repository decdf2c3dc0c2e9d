use std::borrow::Cow;
use std::collections::HashMap;

use super::Tensor;
use crate::{Error, Result};

/// Additive mask applied to excluded logits before a masked softmax.
pub const MASK_VALUE: f64 = -1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable tensors, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Model(format!("duplicate parameter name {:?}", name)));
        }
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn total_size(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// One gradient per parameter of a [`ParamStore`], same order and shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            grads: store
                .values
                .iter()
                .map(|v| Tensor::new(v.shape().to_vec(), vec![0.0; v.len()]).unwrap())
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for x in g.data_mut() {
                *x *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// Second operand may be a single row broadcast over the first.
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    GatherRows { input: Var, rows: Vec<usize> },
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    CrossEntropy { probs: Var, gold: Vec<usize> },
    Sum(Var),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
}

/// A tape of operations. Parameter values are borrowed from the store, so a
/// graph lives no longer than the parameters it reads.
#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

fn shapes(ts: &[&Tensor]) -> String {
    ts.iter()
        .map(|t| format!("{:?}", t.dims()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(logits: &Tensor) -> Tensor {
    let (n, m) = logits.dims();
    let mut out = Vec::with_capacity(n * m);
    for r in 0..n {
        let row = logits.row_slice(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    Tensor::matrix(n, m, out).unwrap()
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf)
    }

    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> Var {
        self.push(Cow::Borrowed(store.get(id)), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Cow::Owned(out), Op::MatMul(a, b)))
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        allow_broadcast: bool,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, m) = ta.dims();
        let (bn, bm) = tb.dims();
        if bm != m || (bn != n && !(allow_broadcast && bn == 1)) {
            return Err(Error::shape(op_name, shapes(&[ta, tb])));
        }
        let mut out = Vec::with_capacity(n * m);
        for r in 0..n {
            let brow = tb.row_slice(if bn == 1 { 0 } else { r });
            out.extend(ta.row_slice(r).iter().zip(brow).map(|(&x, &y)| f(x, y)));
        }
        Tensor::matrix(n, m, out)
    }

    /// Element-wise sum; `b` may also be a single row added to every row of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("add", a, b, true, |x, y| x + y)?;
        Ok(self.push(Cow::Owned(out), Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("sub", a, b, true, |x, y| x - y)?;
        Ok(self.push(Cow::Owned(out), Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("mul", a, b, false, |x, y| x * y)?;
        Ok(self.push(Cow::Owned(out), Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(Cow::Owned(out), Op::Scale(a, factor))
    }

    /// Concatenates along rows (`axis == 0`) or columns (`axis == 1`).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(Error::shape("concat", format!("{} parts on axis {}", parts.len(), axis)));
        }
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = if axis == 0 {
            let m = tensors[0].cols();
            if tensors.iter().any(|t| t.cols() != m) {
                return Err(Error::shape("concat", shapes(&tensors)));
            }
            let n: usize = tensors.iter().map(|t| t.rows()).sum();
            let data: Vec<f64> = tensors.iter().flat_map(|t| t.data().iter().copied()).collect();
            Tensor::matrix(n, m, data)?
        } else {
            let n = tensors[0].rows();
            if tensors.iter().any(|t| t.rows() != n) {
                return Err(Error::shape("concat", shapes(&tensors)));
            }
            let m: usize = tensors.iter().map(|t| t.cols()).sum();
            let mut data = Vec::with_capacity(n * m);
            for r in 0..n {
                for t in &tensors {
                    data.extend_from_slice(t.row_slice(r));
                }
            }
            Tensor::matrix(n, m, data)?
        };
        Ok(self.push(
            Cow::Owned(out),
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    /// Rows (`axis == 0`) or columns (`axis == 1`) `start..start + len`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        let (n, m) = t.dims();
        let extent = match axis {
            0 => n,
            1 => m,
            _ => return Err(Error::shape("slice", format!("axis {}", axis))),
        };
        if start + len > extent || len == 0 {
            return Err(Error::shape(
                "slice",
                format!("{:?} [{}..{}) on axis {}", t.dims(), start, start + len, axis),
            ));
        }
        let out = if axis == 0 {
            Tensor::matrix(len, m, t.data()[start * m..(start + len) * m].to_vec())?
        } else {
            let mut data = Vec::with_capacity(n * len);
            for r in 0..n {
                data.extend_from_slice(&t.row_slice(r)[start..start + len]);
            }
            Tensor::matrix(n, len, data)?
        };
        Ok(self.push(Cow::Owned(out), Op::Slice { input: a, axis, start }))
    }

    /// Embedding-style lookup: output row i is input row `rows[i]`.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let (n, m) = t.dims();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::shape("gather_rows", format!("row {} of {:?}", bad, t.dims())));
        }
        let mut data = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            data.extend_from_slice(t.row_slice(r));
        }
        let out = Tensor::matrix(rows.len(), m, data)?;
        Ok(self.push(
            Cow::Owned(out),
            Op::GatherRows {
                input: a,
                rows: rows.to_vec(),
            },
        ))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(Cow::Owned(out), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(Cow::Owned(out), Op::Tanh(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(Cow::Owned(out), Op::Softmax(a))
    }

    /// Row softmax with `masked[i] == true` entries excluded: they receive
    /// [`MASK_VALUE`] before normalization and end up with probability 0.
    /// Every row needs at least one unmasked entry.
    pub fn masked_softmax(&mut self, a: Var, masked: &[bool]) -> Result<Var> {
        let t = self.value(a);
        let (n, m) = t.dims();
        if masked.len() != n * m {
            return Err(Error::shape(
                "masked_softmax",
                format!("mask of {} entries for {:?}", masked.len(), t.dims()),
            ));
        }
        for r in 0..n {
            if masked[r * m..(r + 1) * m].iter().all(|&x| x) {
                return Err(Error::shape(
                    "masked_softmax",
                    format!("row {} of {:?} is fully masked", r, t.dims()),
                ));
            }
        }
        let shifted = Tensor::matrix(
            n,
            m,
            t.data()
                .iter()
                .zip(masked)
                .map(|(&z, &mk)| if mk { z + MASK_VALUE } else { z })
                .collect(),
        )?;
        // The mask is a constant offset, so the softmax backward rule applies
        // unchanged with respect to the unmasked logits.
        let out = softmax_rows(&shifted);
        Ok(self.push(Cow::Owned(out), Op::Softmax(a)))
    }

    /// `-Σ_r ln probs[r, gold[r]]` as a 1×1 tensor.
    pub fn cross_entropy(&mut self, probs: Var, gold: &[usize]) -> Result<Var> {
        let t = self.value(probs);
        let (n, m) = t.dims();
        if gold.len() != n || gold.iter().any(|&g| g >= m) {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} gold indices for {:?}", gold.len(), t.dims()),
            ));
        }
        let total: f64 = gold.iter().enumerate().map(|(r, &g)| -t.get(r, g).ln()).sum();
        Ok(self.push(
            Cow::Owned(Tensor::scalar(total)),
            Op::CrossEntropy {
                probs,
                gold: gold.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total: f64 = self.value(a).data().iter().sum();
        self.push(Cow::Owned(Tensor::scalar(total)), Op::Sum(a))
    }

    /// Gradients of the scalar `loss` for every parameter in `store`.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("non-scalar loss {:?}", self.value(loss).dims())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?);
        let mut out = Gradients::zeros_like(store);

        fn acc(slot: &mut Option<Tensor>, g: Tensor) {
            match slot {
                Some(existing) => existing.add_assign(&g),
                None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let target = &mut out.grads[id.0];
                    if target.len() != g.len() {
                        return Err(Error::shape("backward", "parameter shape changed"));
                    }
                    target.add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose())?;
                    let gb = self.value(*a).transpose().matmul(&g)?;
                    acc(&mut grads[a.0], ga);
                    acc(&mut grads[b.0], gb);
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    let gb = self.reduce_broadcast(&g, self.value(*b), sign);
                    acc(&mut grads[a.0], g);
                    acc(&mut grads[b.0], gb);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let ga = zip_map(&g, vb, |x, y| x * y);
                    let gb = zip_map(&g, va, |x, y| x * y);
                    acc(&mut grads[a.0], ga);
                    acc(&mut grads[b.0], gb);
                }
                Op::Scale(a, factor) => {
                    let f = *factor;
                    acc(&mut grads[a.0], g.map(|x| x * f));
                }
                Op::Concat { parts, axis } => {
                    let (n, m) = g.dims();
                    let mut offset = 0;
                    for p in parts {
                        let (pn, pm) = self.value(*p).dims();
                        let piece = if *axis == 0 {
                            Tensor::matrix(pn, m, g.data()[offset * m..(offset + pn) * m].to_vec())?
                        } else {
                            let mut data = Vec::with_capacity(n * pm);
                            for r in 0..n {
                                data.extend_from_slice(&g.row_slice(r)[offset..offset + pm]);
                            }
                            Tensor::matrix(n, pm, data)?
                        };
                        offset += if *axis == 0 { pn } else { pm };
                        acc(&mut grads[p.0], piece);
                    }
                }
                Op::Slice { input, axis, start } => {
                    let src = self.value(*input);
                    let (n, m) = src.dims();
                    let mut full = Tensor::zeros(n, m);
                    let (gn, gm) = g.dims();
                    let data = full.data_mut();
                    for r in 0..gn {
                        for c in 0..gm {
                            let (rr, cc) = if *axis == 0 { (r + start, c) } else { (r, c + start) };
                            data[rr * m + cc] = g.get(r, c);
                        }
                    }
                    acc(&mut grads[input.0], reshape_like(full, src));
                }
                Op::GatherRows { input, rows } => {
                    let src = self.value(*input);
                    let (n, m) = src.dims();
                    let mut full = Tensor::zeros(n, m);
                    let data = full.data_mut();
                    for (i, &r) in rows.iter().enumerate() {
                        for (d, s) in data[r * m..(r + 1) * m].iter_mut().zip(g.row_slice(i)) {
                            *d += s;
                        }
                    }
                    acc(&mut grads[input.0], reshape_like(full, src));
                }
                Op::Sigmoid(a) => {
                    let ga = zip_map(&g, &node.value, |gx, y| gx * y * (1.0 - y));
                    acc(&mut grads[a.0], ga);
                }
                Op::Tanh(a) => {
                    let ga = zip_map(&g, &node.value, |gx, y| gx * (1.0 - y * y));
                    acc(&mut grads[a.0], ga);
                }
                Op::Softmax(a) => {
                    let y: &Tensor = &node.value;
                    let (n, m) = y.dims();
                    let mut data = Vec::with_capacity(n * m);
                    for r in 0..n {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        data.extend(yr.iter().zip(gr).map(|(&yi, &gi)| yi * (gi - dot)));
                    }
                    let ga = Tensor::new(y.shape().to_vec(), data)?;
                    acc(&mut grads[a.0], ga);
                }
                Op::CrossEntropy { probs, gold } => {
                    let p = self.value(*probs);
                    let (n, m) = p.dims();
                    let scale = g.data()[0];
                    let mut full = Tensor::zeros(n, m);
                    let data = full.data_mut();
                    for (r, &k) in gold.iter().enumerate() {
                        data[r * m + k] -= scale / p.get(r, k);
                    }
                    acc(&mut grads[probs.0], reshape_like(full, p));
                }
                Op::Sum(a) => {
                    let src = self.value(*a);
                    let scale = g.data()[0];
                    acc(
                        &mut grads[a.0],
                        Tensor::new(src.shape().to_vec(), vec![scale; src.len()])?,
                    );
                }
            }
        }
        Ok(out)
    }

    fn reduce_broadcast(&self, g: &Tensor, b: &Tensor, sign: f64) -> Tensor {
        if g.dims() == b.dims() {
            return g.map(|x| sign * x);
        }
        let (n, m) = g.dims();
        let mut data = vec![0.0; m];
        for r in 0..n {
            for (d, x) in data.iter_mut().zip(g.row_slice(r)) {
                *d += sign * x;
            }
        }
        Tensor::new(b.shape().to_vec(), data).unwrap()
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
    .unwrap()
}

fn reshape_like(t: Tensor, like: &Tensor) -> Tensor {
    Tensor::new(like.shape().to_vec(), t.into_data()).unwrap()
}
