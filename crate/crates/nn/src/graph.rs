//! Parameter storage and a dynamic reverse-mode tape.
//!
//! A [`Graph`] borrows a [`ParamStore`] read-only while recording; calling
//! [`Graph::backward`] returns a [`Grads`] aligned with the store, which the
//! optimizer then applies.

use crate::error::{shape_err, NnError, Result};
use crate::tensor::{gemm, sigmoid, Tensor};

/// Clamp used for probabilities inside the Bernoulli KL.
pub const KL_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
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

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// Gradients for every parameter of a store, same order and shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads(Vec<Tensor>);

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads(store.values.iter().map(|t| Tensor::zeros(t.shape())).collect())
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.0[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.0.iter()
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.0 {
            for v in t.data_mut() {
                *v *= c;
            }
        }
    }

    /// Euclidean norm over all entries.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|t| t.data()).all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ConvGeom {
    batch: usize,
    in_ch: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.oh * self.ow
    }
}

/// Second argument of the Bernoulli KL.
pub enum KlTarget {
    /// Logits of another recorded value; gradients flow into it.
    Logits(Var),
    /// Fixed probabilities (clamped to `[KL_EPS, 1 - KL_EPS]`).
    Probs(Tensor),
}

enum Op {
    Leaf,
    Param(ParamId),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    Relu(Var),
    Sigmoid(Var),
    Reshape(Var),
    EmbeddingMean {
        table: Var,
        bags: Vec<Vec<usize>>,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    GatherRows {
        x: Var,
        idx: Vec<usize>,
    },
    MaskedMaxRows {
        x: Var,
        argmax: Vec<usize>,
    },
    WeightedSum {
        x: Var,
        weights: Tensor,
    },
    Bce {
        logits: Var,
        targets: Tensor,
        weights: Tensor,
    },
    Kl {
        p: Var,
        q: Option<Var>,
        q_probs: Option<Tensor>,
        weights: Tensor,
    },
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

struct Node {
    value: Value,
    op: Op,
}

/// A recording of one forward computation.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return shape_err(op, format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.store.get(*id),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; receives gradients but they are not returned.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// The node reading parameter `id` (created once per graph).
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// `x·wᵀ + b` for `x: [batch, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.shape().len() != 2 || wv.shape().len() != 2 || xv.shape()[1] != wv.shape()[1] {
            return shape_err("linear", format!("x {:?}, w {:?}", xv.shape(), wv.shape()));
        }
        let (batch, inp, out) = (xv.shape()[0], xv.shape()[1], wv.shape()[0]);
        let mut y = vec![0.0; batch * out];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.shape() != [out] {
                return shape_err("linear", format!("bias {:?} for {out} outputs", bv.shape()));
            }
            for row in y.chunks_exact_mut(out) {
                row.copy_from_slice(bv.data());
            }
        }
        gemm(
            batch,
            inp,
            out,
            1.0,
            xv.data(),
            (inp, 1),
            wv.data(),
            (1, inp),
            1.0,
            &mut y,
            (out, 1),
        );
        let t = Tensor::new(vec![batch, out], y)?;
        Ok(self.push(t, Op::Linear { x, w, b }))
    }

    /// Valid, stride-1 convolution of `x: [batch, c, h, w]` with
    /// `w: [o, c, kh, kw]` and bias `[o]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        let (xs, ws) = (xv.shape(), wv.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || ws[2] > xs[2] || ws[3] > xs[3] {
            return shape_err("conv2d", format!("x {xs:?}, w {ws:?}"));
        }
        let geom = ConvGeom {
            batch: xs[0],
            in_ch: xs[1],
            h: xs[2],
            w: xs[3],
            out_ch: ws[0],
            kh: ws[2],
            kw: ws[3],
            oh: xs[2] - ws[2] + 1,
            ow: xs[3] - ws[3] + 1,
        };
        let (k, p) = (geom.k(), geom.p());
        let mut cols = vec![0.0; geom.batch * k * p];
        let x_item = geom.in_ch * geom.h * geom.w;
        for bi in 0..geom.batch {
            let xd = &xv.data()[bi * x_item..(bi + 1) * x_item];
            let cb = &mut cols[bi * k * p..(bi + 1) * k * p];
            for c in 0..geom.in_ch {
                for i in 0..geom.kh {
                    for j in 0..geom.kw {
                        let row = (c * geom.kh + i) * geom.kw + j;
                        for oy in 0..geom.oh {
                            let src = c * geom.h * geom.w + (oy + i) * geom.w + j;
                            let dst = row * p + oy * geom.ow;
                            cb[dst..dst + geom.ow].copy_from_slice(&xd[src..src + geom.ow]);
                        }
                    }
                }
            }
        }
        let out_item = geom.out_ch * p;
        let mut y = vec![0.0; geom.batch * out_item];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.shape() != [geom.out_ch] {
                return shape_err("conv2d", format!("bias {:?}", bv.shape()));
            }
            for item in y.chunks_exact_mut(out_item) {
                for (o, chunk) in item.chunks_exact_mut(p).enumerate() {
                    chunk.fill(bv.data()[o]);
                }
            }
        }
        for bi in 0..geom.batch {
            gemm(
                geom.out_ch,
                k,
                p,
                1.0,
                wv.data(),
                (k, 1),
                &cols[bi * k * p..(bi + 1) * k * p],
                (p, 1),
                1.0,
                &mut y[bi * out_item..(bi + 1) * out_item],
                (p, 1),
            );
        }
        let t = Tensor::new(vec![geom.batch, geom.out_ch, geom.oh, geom.ow], y)?;
        Ok(self.push(t, Op::Conv2d { x, w, b, geom, cols }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x).map(|v| v.max(0.0));
        self.push(t, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x).map(sigmoid);
        self.push(t, Op::Sigmoid(x))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// `[batch, rest…]` to `[batch, prod(rest)]`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let shape = [v.rows(), v.row_len()];
        self.reshape(x, &shape)
    }

    /// Row `r` of the result is the mean of the `table` rows listed in
    /// `bags[r]`. Each bag is summed in sorted order, so permuting a bag
    /// gives bit-identical output.
    pub fn embedding_mean(&mut self, table: Var, bags: &[Vec<usize>]) -> Result<Var> {
        let tv = self.value(table);
        if tv.shape().len() != 2 {
            return shape_err("embedding_mean", format!("table {:?}", tv.shape()));
        }
        let (vocab, dim) = (tv.shape()[0], tv.shape()[1]);
        let mut sorted = Vec::with_capacity(bags.len());
        let mut out = vec![0.0; bags.len() * dim];
        for (r, bag) in bags.iter().enumerate() {
            if bag.is_empty() {
                return Err(NnError::EmptyBag(r));
            }
            let mut bag = bag.clone();
            bag.sort_unstable();
            if let Some(&bad) = bag.iter().find(|&&id| id >= vocab) {
                return shape_err("embedding_mean", format!("token {bad} >= vocab {vocab}"));
            }
            let row = &mut out[r * dim..(r + 1) * dim];
            for &id in &bag {
                for (o, v) in row.iter_mut().zip(tv.row(id)) {
                    *o += v;
                }
            }
            let inv = 1.0 / bag.len() as f64;
            row.iter_mut().for_each(|o| *o *= inv);
            sorted.push(bag);
        }
        let t = Tensor::new(vec![bags.len(), dim], out)?;
        Ok(self.push(t, Op::EmbeddingMean { table, bags: sorted }))
    }

    /// Normalizes each row to zero mean and unit variance, then applies the
    /// per-feature affine map `gamma, beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        const EPS: f64 = 1e-5;
        let xv = self.value(x);
        let d = *xv.shape().last().unwrap_or(&0);
        if self.value(gamma).shape() != [d] || self.value(beta).shape() != [d] || d == 0 {
            return shape_err("layer_norm", format!("x {:?}", xv.shape()));
        }
        let rows = xv.len() / d;
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &xv.data()[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + EPS).sqrt();
            inv_std[r] = is;
            for (h, v) in xhat[r * d..(r + 1) * d].iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let y: Vec<f64> = xhat
            .iter()
            .enumerate()
            .map(|(i, h)| h * g[i % d] + b[i % d])
            .collect();
        let t = Tensor::new(xv.shape().to_vec(), y)?;
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("add", av, bv)?;
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("mul", av, bv)?;
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x).map(|v| v * c);
        self.push(t, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x).map(|v| v + c);
        self.push(t, Op::AddScalar(x))
    }

    /// Rows `idx[0], idx[1], …` of `x: [rows, cols]`, repeats allowed.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().len() != 2 {
            return shape_err("gather_rows", format!("{:?}", xv.shape()));
        }
        let (rows, cols) = (xv.shape()[0], xv.shape()[1]);
        let mut out = Vec::with_capacity(idx.len() * cols);
        for &r in idx {
            if r >= rows {
                return shape_err("gather_rows", format!("row {r} of {rows}"));
            }
            out.extend_from_slice(xv.row(r));
        }
        let t = Tensor::new(vec![idx.len(), cols], out)?;
        Ok(self.push(t, Op::GatherRows { x, idx: idx.to_vec() }))
    }

    /// Row-wise maximum of `x: [rows, cols]` over the columns where
    /// `mask` is nonzero.
    pub fn masked_max_rows(&mut self, x: Var, mask: &Tensor) -> Result<Var> {
        let xv = self.value(x);
        same_shape("masked_max_rows", xv, mask)?;
        if xv.shape().len() != 2 {
            return shape_err("masked_max_rows", format!("{:?}", xv.shape()));
        }
        let cols = xv.shape()[1];
        let mut out = Vec::with_capacity(xv.rows());
        let mut argmax = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let best = (0..cols)
                .filter(|&c| mask.data()[r * cols + c] != 0.0)
                .max_by(|&a, &b| xv.row(r)[a].total_cmp(&xv.row(r)[b]).then(b.cmp(&a)))
                .ok_or(NnError::EmptyMask)?;
            out.push(xv.row(r)[best]);
            argmax.push(best);
        }
        let t = Tensor::new(vec![out.len()], out)?;
        Ok(self.push(t, Op::MaskedMaxRows { x, argmax }))
    }

    /// Scalar `Σ weights ⊙ x`.
    pub fn weighted_sum(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        let xv = self.value(x);
        same_shape("weighted_sum", xv, &weights)?;
        let s = xv.data().iter().zip(weights.data()).map(|(a, w)| a * w).sum();
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, weights }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let w = Tensor::full(self.value(x).shape(), 1.0);
        self.weighted_sum(x, w)
    }

    /// Scalar `Σ weights ⊙ bce(sigmoid(logits), targets)`, computed from the
    /// logits directly for stability.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Tensor, weights: Tensor) -> Result<Var> {
        let lv = self.value(logits);
        same_shape("bce_with_logits", lv, &targets)?;
        same_shape("bce_with_logits", lv, &weights)?;
        let mut s = 0.0;
        for ((&x, &t), &w) in lv.data().iter().zip(targets.data()).zip(weights.data()) {
            if w != 0.0 {
                s += w * (x.max(0.0) - x * t + (-x.abs()).exp().ln_1p());
            }
        }
        Ok(self.push(
            Tensor::scalar(s),
            Op::Bce {
                logits,
                targets,
                weights,
            },
        ))
    }

    /// Scalar `Σ weights ⊙ KL(Bern(p) ‖ Bern(q))` with `p = sigmoid(p_logits)`
    /// and `q` given as logits or as probabilities clamped to
    /// `[KL_EPS, 1 - KL_EPS]`. Computed in log-sigmoid space, so `p` is never
    /// clamped and its gradient never vanishes exactly.
    pub fn kl_bernoulli(&mut self, p_logits: Var, q: KlTarget, weights: Tensor) -> Result<Var> {
        let pv = self.value(p_logits);
        same_shape("kl_bernoulli", pv, &weights)?;
        let (q_var, q_probs) = match q {
            KlTarget::Logits(v) => {
                same_shape("kl_bernoulli", pv, self.value(v))?;
                (Some(v), None)
            }
            KlTarget::Probs(t) => {
                same_shape("kl_bernoulli", pv, &t)?;
                (None, Some(t))
            }
        };
        let mut s = 0.0;
        for i in 0..pv.len() {
            let w = weights.data()[i];
            if w == 0.0 {
                continue;
            }
            let (lq, l1q) = match (&q_var, &q_probs) {
                (Some(v), _) => log_sigmoids(self.value(*v).data()[i]),
                (_, Some(t)) => log_probs(t.data()[i]),
                _ => unreachable!(),
            };
            s += w * bernoulli_kl(pv.data()[i], lq, l1q);
        }
        Ok(self.push(
            Tensor::scalar(s),
            Op::Kl {
                p: p_logits,
                q: q_var,
                q_probs,
                weights,
            },
        ))
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NnError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        let mut out = Grads::zeros_like(self.store);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads, &mut out);
        }
        Ok(out)
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>], out: &mut Grads) {
        let mut acc = |v: Var, delta: Tensor| match &mut grads[v.0] {
            Some(t) => t.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Param(id) => out.0[id.0].add_assign(g),
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (batch, inp, outd) = (xv.shape()[0], xv.shape()[1], wv.shape()[0]);
                let mut dx = vec![0.0; batch * inp];
                gemm(batch, outd, inp, 1.0, g.data(), (outd, 1), wv.data(), (inp, 1), 0.0, &mut dx, (inp, 1));
                let mut dw = vec![0.0; outd * inp];
                gemm(outd, batch, inp, 1.0, g.data(), (1, outd), xv.data(), (inp, 1), 0.0, &mut dw, (inp, 1));
                if let Some(b) = b {
                    let mut db = vec![0.0; outd];
                    for row in g.data().chunks_exact(outd) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    acc(*b, Tensor::new(vec![outd], db).expect("bias shape"));
                }
                acc(*x, Tensor::new(xv.shape().to_vec(), dx).expect("x shape"));
                acc(*w, Tensor::new(wv.shape().to_vec(), dw).expect("w shape"));
            }
            Op::Conv2d { x, w, b, geom, cols } => {
                let wv = self.value(*w);
                let (k, p) = (geom.k(), geom.p());
                let out_item = geom.out_ch * p;
                let mut dw = vec![0.0; geom.out_ch * k];
                let mut dx = vec![0.0; geom.batch * geom.in_ch * geom.h * geom.w];
                let mut dcols = vec![0.0; k * p];
                let x_item = geom.in_ch * geom.h * geom.w;
                for bi in 0..geom.batch {
                    let gy = &g.data()[bi * out_item..(bi + 1) * out_item];
                    let cb = &cols[bi * k * p..(bi + 1) * k * p];
                    gemm(geom.out_ch, p, k, 1.0, gy, (p, 1), cb, (1, p), 1.0, &mut dw, (k, 1));
                    gemm(k, geom.out_ch, p, 1.0, wv.data(), (1, k), gy, (p, 1), 0.0, &mut dcols, (p, 1));
                    let dxb = &mut dx[bi * x_item..(bi + 1) * x_item];
                    for c in 0..geom.in_ch {
                        for i in 0..geom.kh {
                            for j in 0..geom.kw {
                                let row = (c * geom.kh + i) * geom.kw + j;
                                for oy in 0..geom.oh {
                                    let dst = c * geom.h * geom.w + (oy + i) * geom.w + j;
                                    let src = row * p + oy * geom.ow;
                                    for (d, s) in dxb[dst..dst + geom.ow]
                                        .iter_mut()
                                        .zip(&dcols[src..src + geom.ow])
                                    {
                                        *d += s;
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    let mut db = vec![0.0; geom.out_ch];
                    for item in g.data().chunks_exact(out_item) {
                        for (o, chunk) in item.chunks_exact(p).enumerate() {
                            db[o] += chunk.iter().sum::<f64>();
                        }
                    }
                    acc(*b, Tensor::new(vec![geom.out_ch], db).expect("bias shape"));
                }
                acc(*w, Tensor::new(wv.shape().to_vec(), dw).expect("w shape"));
                let xs = self.value(*x).shape().to_vec();
                acc(*x, Tensor::new(xs, dx).expect("x shape"));
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let d = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
                    .collect();
                acc(*x, Tensor::new(xv.shape().to_vec(), d).expect("shape"));
            }
            Op::Sigmoid(x) => {
                let yv = self.value(Var(i));
                let d = yv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gv)| gv * y * (1.0 - y))
                    .collect();
                acc(*x, Tensor::new(yv.shape().to_vec(), d).expect("shape"));
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                acc(*x, g.clone().reshaped(&shape).expect("shape"));
            }
            Op::EmbeddingMean { table, bags } => {
                let tv = self.value(*table);
                let dim = tv.shape()[1];
                let mut dt = Tensor::zeros(tv.shape());
                for (r, bag) in bags.iter().enumerate() {
                    let inv = 1.0 / bag.len() as f64;
                    let gr = &g.data()[r * dim..(r + 1) * dim];
                    for &id in bag {
                        let row = &mut dt.data_mut()[id * dim..(id + 1) * dim];
                        for (d, v) in row.iter_mut().zip(gr) {
                            *d += v * inv;
                        }
                    }
                }
                acc(*table, dt);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gamma);
                let d = gv.len();
                let rows = xhat.len() / d;
                let mut dgamma = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                let mut dx = vec![0.0; xhat.len()];
                for r in 0..rows {
                    let gr = &g.data()[r * d..(r + 1) * d];
                    let hr = &xhat[r * d..(r + 1) * d];
                    let mut sum_dh = 0.0;
                    let mut sum_dh_h = 0.0;
                    for c in 0..d {
                        dgamma[c] += gr[c] * hr[c];
                        dbeta[c] += gr[c];
                        let dh = gr[c] * gv.data()[c];
                        sum_dh += dh;
                        sum_dh_h += dh * hr[c];
                    }
                    for c in 0..d {
                        let dh = gr[c] * gv.data()[c];
                        dx[r * d + c] = inv_std[r] / d as f64
                            * (d as f64 * dh - sum_dh - hr[c] * sum_dh_h);
                    }
                }
                let xs = self.value(*x).shape().to_vec();
                acc(*x, Tensor::new(xs, dx).expect("shape"));
                acc(*gamma, Tensor::new(vec![d], dgamma).expect("shape"));
                acc(*beta, Tensor::new(vec![d], dbeta).expect("shape"));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                let db = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                let shape = av.shape().to_vec();
                acc(*a, Tensor::new(shape.clone(), da).expect("shape"));
                acc(*b, Tensor::new(shape, db).expect("shape"));
            }
            Op::Scale(x, c) => acc(*x, g.map(|v| v * c)),
            Op::AddScalar(x) => acc(*x, g.clone()),
            Op::GatherRows { x, idx } => {
                let xv = self.value(*x);
                let cols = xv.shape()[1];
                let mut d = Tensor::zeros(xv.shape());
                for (k, &r) in idx.iter().enumerate() {
                    for (dv, gv) in d.data_mut()[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&g.data()[k * cols..(k + 1) * cols])
                    {
                        *dv += gv;
                    }
                }
                acc(*x, d);
            }
            Op::MaskedMaxRows { x, argmax } => {
                let xv = self.value(*x);
                let cols = xv.shape()[1];
                let mut d = Tensor::zeros(xv.shape());
                for (r, &c) in argmax.iter().enumerate() {
                    d.data_mut()[r * cols + c] = g.data()[r];
                }
                acc(*x, d);
            }
            Op::WeightedSum { x, weights } => {
                let s = g.item();
                acc(*x, weights.map(|w| w * s));
            }
            Op::Bce {
                logits,
                targets,
                weights,
            } => {
                let s = g.item();
                let lv = self.value(*logits);
                let d = lv
                    .data()
                    .iter()
                    .zip(targets.data())
                    .zip(weights.data())
                    .map(|((&x, &t), &w)| s * w * (sigmoid(x) - t))
                    .collect();
                acc(*logits, Tensor::new(lv.shape().to_vec(), d).expect("shape"));
            }
            Op::Kl {
                p,
                q,
                q_probs,
                weights,
            } => {
                let s = g.item();
                let pv = self.value(*p);
                let n = pv.len();
                let mut dp = vec![0.0; n];
                let mut dq = vec![0.0; n];
                for i in 0..n {
                    let w = weights.data()[i];
                    if w == 0.0 {
                        continue;
                    }
                    let z = pv.data()[i];
                    let p = sigmoid(z);
                    match (q, q_probs) {
                        (Some(v), _) => {
                            let zq = self.value(*v).data()[i];
                            dp[i] = s * w * p * (1.0 - p) * (z - zq);
                            dq[i] = s * w * (sigmoid(zq) - p);
                        }
                        (_, Some(t)) => {
                            let (lq, l1q) = log_probs(t.data()[i]);
                            dp[i] = s * w * p * (1.0 - p) * (z - (lq - l1q));
                        }
                        _ => unreachable!(),
                    }
                }
                let shape = pv.shape().to_vec();
                acc(*p, Tensor::new(shape.clone(), dp).expect("shape"));
                if let Some(qv) = q {
                    acc(*qv, Tensor::new(shape, dq).expect("shape"));
                }
            }
        }
    }
}

/// `(ln sigmoid(z), ln sigmoid(-z))` without overflow.
fn log_sigmoids(z: f64) -> (f64, f64) {
    let sp = (-z.abs()).exp().ln_1p();
    (-(sp + (-z).max(0.0)), -(sp + z.max(0.0)))
}

/// `(ln q, ln(1 - q))` of a probability clamped to `[KL_EPS, 1 - KL_EPS]`.
fn log_probs(q: f64) -> (f64, f64) {
    let q = q.clamp(KL_EPS, 1.0 - KL_EPS);
    (q.ln(), (1.0 - q).ln())
}

/// Bernoulli KL from `sigmoid(z)` to the distribution with log-probabilities
/// `(lq, l1q)`.
fn bernoulli_kl(z: f64, lq: f64, l1q: f64) -> f64 {
    let (lp, l1p) = log_sigmoids(z);
    let p = sigmoid(z);
    (p * (lp - lq) + (1.0 - p) * (l1p - l1q)).max(0.0)
}
